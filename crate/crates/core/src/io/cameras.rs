//! NeRF-synthetic style camera files: a horizontal field of view plus
//! OpenGL camera-to-world matrices (−z forward, +y up).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};
use crate::render::{Camera, DEFAULT_NEAR};

pub const DEFAULT_SIZE: u32 = 800;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrame {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file_path: Option<String>,
    pub transform_matrix: [[f64; 4]; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    pub camera_angle_x: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<f64>,
    pub frames: Vec<CameraFrame>,
}

/// Flips the y and z camera axes between the OpenGL and +z-forward conventions.
fn flip() -> Mat3 {
    Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
}

impl CameraFile {
    pub fn width(&self) -> u32 {
        self.w.unwrap_or(DEFAULT_SIZE)
    }

    pub fn height(&self) -> u32 {
        self.h.unwrap_or(DEFAULT_SIZE)
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        if !(self.camera_angle_x > 0.0 && self.camera_angle_x < std::f64::consts::PI) {
            return Err(Error::SchemaError(format!("camera_angle_x {} not in (0, π)", self.camera_angle_x)));
        }
        let (w, h) = (self.width(), self.height());
        let f = w as f64 / (2.0 * (self.camera_angle_x / 2.0).tan());
        self.frames
            .iter()
            .enumerate()
            .map(|(i, fr)| {
                let m = &fr.transform_matrix;
                let rot_gl = Mat3::from_fn(|r, c| m[r][c]);
                let pos = Vec3::new(m[0][3], m[1][3], m[2][3]);
                let orth = (rot_gl.transpose() * rot_gl - Mat3::identity()).norm();
                if !(orth < 1e-6) || !(rot_gl.determinant() > 0.0) {
                    return Err(Error::SchemaError(format!("frame {i}: transform_matrix is not a rigid transform")));
                }
                let c2w = rot_gl * flip();
                let rotation = c2w.transpose();
                let mut cam = Camera::new(rotation, -(rotation * pos), f, f, w, h)?;
                cam.near = self.near.unwrap_or(DEFAULT_NEAR);
                Ok(cam)
            })
            .collect()
    }

    /// Builds a file from cameras sharing one set of intrinsics.
    pub fn from_cameras(cams: &[Camera]) -> Result<Self> {
        let first = cams.first().ok_or(Error::EmptyDataset)?;
        for c in cams {
            if c.width != first.width || c.height != first.height || c.fx != first.fx || c.near != first.near {
                return Err(Error::InvalidConfig("cameras with differing intrinsics cannot share a camera file".into()));
            }
        }
        let frames = cams
            .iter()
            .map(|c| {
                let rot_gl = c.rotation.transpose() * flip();
                let pos = c.center();
                let mut m = [[0.0; 4]; 4];
                for r in 0..3 {
                    for col in 0..3 {
                        m[r][col] = rot_gl[(r, col)];
                    }
                    m[r][3] = pos[r];
                }
                m[3][3] = 1.0;
                CameraFrame {
                    file_path: None,
                    transform_matrix: m,
                }
            })
            .collect();
        Ok(Self {
            camera_angle_x: 2.0 * (first.width as f64 / (2.0 * first.fx)).atan(),
            w: Some(first.width),
            h: Some(first.height),
            near: Some(first.near),
            frames,
        })
    }

    /// Output image name for frame `i`: the basename of `file_path` plus `.png`, else a zero-padded index.
    pub fn image_name(&self, i: usize) -> String {
        self.frames
            .get(i)
            .and_then(|f| f.file_path.as_deref())
            .and_then(|p| Path::new(p).file_name())
            .map(|n| {
                let n = n.to_string_lossy();
                if n.ends_with(".png") {
                    n.into_owned()
                } else {
                    format!("{n}.png")
                }
            })
            .unwrap_or_else(|| format!("{i:04}.png"))
    }
}

pub fn parse_camera_file(path: &Path, text: &str) -> Result<CameraFile> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        position: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    for key in ["camera_angle_x", "frames"] {
        if value.get(key).is_none() {
            return Err(Error::SchemaError(format!("{}: missing '{key}'", path.display())));
        }
    }
    serde_json::from_value(value).map_err(|e| Error::SchemaError(format!("{}: {e}", path.display())))
}

pub fn read_camera_file(path: &Path) -> Result<CameraFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_camera_file(path, &text)
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>> {
    read_camera_file(path)?.cameras()
}

pub fn encode_camera_file(file: &CameraFile) -> String {
    let mut s = serde_json::to_string_pretty(file).expect("camera file serializes");
    s.push('\n');
    s
}

pub fn write_camera_file(path: &Path, file: &CameraFile) -> Result<()> {
    std::fs::write(path, encode_camera_file(file)).map_err(|e| Error::io(path, e))
}

pub fn write_cameras(path: &Path, cams: &[Camera]) -> Result<()> {
    write_camera_file(path, &CameraFile::from_cameras(cams)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_file() -> CameraFile {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        CameraFile {
            camera_angle_x: std::f64::consts::FRAC_PI_2,
            w: None,
            h: None,
            near: None,
            frames: vec![CameraFrame {
                file_path: Some("./train/r_0".into()),
                transform_matrix: m,
            }],
        }
    }

    #[test]
    fn identity_pose_focal_length() {
        let cams = identity_file().cameras().unwrap();
        assert_eq!(cams[0].width, 800);
        assert!((cams[0].fx - 400.0).abs() < 1e-9);
        // OpenGL looks down −z, so a point at z = −2 is in front of the camera.
        let t = cams[0].to_camera(&Vec3::new(0.0, 1.0, -2.0));
        assert!((t - Vec3::new(0.0, -1.0, 2.0)).norm() < 1e-12);
        assert_eq!(identity_file().image_name(0), "r_0.png");
    }

    #[test]
    fn missing_angle_is_schema_error() {
        let err = parse_camera_file(Path::new("c.json"), r#"{"frames": []}"#).unwrap_err();
        assert!(matches!(err, Error::SchemaError(ref m) if m.contains("camera_angle_x")));
        let err = parse_camera_file(Path::new("c.json"), "{\n\"camera_angle_x\": ").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
    }

    #[test]
    fn convert_and_invert() {
        let cam = Camera::look_at(Vec3::new(3.0, -1.0, 2.0), Vec3::new(0.1, 0.2, 0.0), Vec3::z(), 0.9, 64, 48).unwrap();
        let file = CameraFile::from_cameras(&[cam.clone()]).unwrap();
        let back = &file.cameras().unwrap()[0];
        assert!((back.rotation - cam.rotation).norm() < 1e-9);
        assert!((back.translation - cam.translation).norm() < 1e-9);
        assert!((back.fx - cam.fx).abs() < 1e-9);
        let text = encode_camera_file(&file);
        assert_eq!(parse_camera_file(Path::new("c.json"), &text).unwrap(), file);
    }
}
