use crate::error::{Error, Result};
use crate::math::{Mat3, Vec3};

/// Pinhole camera; camera space is +x right, +y down, +z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    /// World-to-camera rotation.
    pub rotation: Mat3,
    /// World-to-camera translation.
    pub translation: Vec3,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub near: f64,
}

pub const DEFAULT_NEAR: f64 = 0.01;

impl Camera {
    pub fn new(rotation: Mat3, translation: Vec3, fx: f64, fy: f64, width: u32, height: u32) -> Result<Self> {
        let cam = Self {
            rotation,
            translation,
            fx,
            fy,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
            near: DEFAULT_NEAR,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidConfig(format!("focal lengths {} {} must be > 0", self.fx, self.fy)));
        }
        if self.width < 1 || self.height < 1 {
            return Err(Error::InvalidConfig("image size must be >= 1".into()));
        }
        Ok(())
    }

    /// Camera at `eye` looking at `target`, with world `up` mapped to image up.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, fov_x: f64, width: u32, height: u32) -> Result<Self> {
        let forward = (target - eye).normalize();
        let right = forward.cross(&up).normalize();
        let down = forward.cross(&right);
        let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        let f = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Self::new(rotation, translation, f, f, width, height)
    }

    pub fn center(&self) -> Vec3 {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Same pose with resolution, focal lengths and principal point scaled by `factor`.
    pub fn scaled(&self, factor: u32) -> Self {
        let f = factor as f64;
        Self {
            fx: self.fx * f,
            fy: self.fy * f,
            cx: self.cx * f,
            cy: self.cy * f,
            width: self.width * factor,
            height: self.height * factor,
            ..self.clone()
        }
    }
}
