//! Gaussians, clouds and the base triangle mesh.

pub mod density;
pub mod sh;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::math::{self, sigmoid, Mat3, Quat, Vec3};

pub use density::{density_at, DensityField, DENSITY_FLOOR};

/// One 3D Gaussian in the de-facto 3DGS parameterization.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3D {
    pub mean: Vec3,
    /// Log of the per-axis standard deviations.
    pub log_scales: Vec3,
    /// Raw (w, x, y, z) quaternion, normalized on use.
    pub rotation: Quat,
    pub opacity_logit: f64,
    /// RGB spherical-harmonic coefficients, basis-major (`sh[3 * k + c]`).
    pub sh: Vec<f64>,
}

impl Gaussian3D {
    /// Isotropic Gaussian with the given std, opacity and flat DC color of zero.
    pub fn isotropic(mean: Vec3, sigma: f64, opacity: f64) -> Self {
        Self {
            mean,
            log_scales: Vec3::repeat(sigma.ln()),
            rotation: math::identity_quat(),
            opacity_logit: math::logit(opacity),
            sh: vec![0.0; 3],
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    pub fn scales(&self) -> Vec3 {
        self.log_scales.map(f64::exp)
    }

    pub fn rotation_matrix(&self) -> Result<Mat3> {
        math::rotation_matrix(&self.rotation).ok_or(Error::ZeroQuaternion)
    }

    /// Σ = R diag(s²) Rᵀ.
    pub fn covariance(&self) -> Result<Mat3> {
        let r = self.rotation_matrix()?;
        Ok(covariance_from(&r, &self.scales()))
    }

    pub fn sh_degree(&self) -> Option<usize> {
        sh::degree_for_len(self.sh.len())
    }

    /// View-dependent color with the +0.5 offset and zero clamp.
    pub fn radiance(&self, degree: usize, view_dir: &Vec3) -> Result<[f64; 3]> {
        sh::radiance(degree, &self.sh, view_dir)
    }
}

pub fn covariance_from(r: &Mat3, scales: &Vec3) -> Mat3 {
    let s2 = Matrix3::from_diagonal(&scales.component_mul(scales));
    r * s2 * r.transpose()
}

/// Free-function form of [`Gaussian3D::covariance`].
pub fn covariance(g: &Gaussian3D) -> Result<Mat3> {
    g.covariance()
}

/// Free-function form of [`Gaussian3D::radiance`].
pub fn sh_radiance(g: &Gaussian3D, degree: usize, view_dir: &Vec3) -> Result<[f64; 3]> {
    g.radiance(degree, view_dir)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudRole {
    Unconstrained,
    Regularized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCloud {
    pub gaussians: Vec<Gaussian3D>,
    pub sh_degree: usize,
    pub role: CloudRole,
}

impl GaussianCloud {
    /// Checks that every member carries `3 (sh_degree + 1)^2` coefficients.
    pub fn new(gaussians: Vec<Gaussian3D>, sh_degree: usize, role: CloudRole) -> Result<Self> {
        if sh_degree > sh::MAX_DEGREE {
            return Err(Error::DegreeMismatch {
                degree: sh_degree,
                expected: 0,
                got: 0,
            });
        }
        let expected = sh::coeff_count(sh_degree);
        if let Some(bad) = gaussians.iter().find(|g| g.sh.len() != expected) {
            return Err(Error::DegreeMismatch {
                degree: sh_degree,
                expected,
                got: bad.sh.len(),
            });
        }
        Ok(Self {
            gaussians,
            sh_degree,
            role,
        })
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn means(&self) -> Vec<[f64; 3]> {
        self.gaussians
            .iter()
            .map(|g| [g.mean.x, g.mean.y, g.mean.z])
            .collect()
    }
}

pub const MIN_FACE_AREA: f64 = 1e-12;

/// Indexed triangle mesh with area-weighted vertex normals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub normals: Vec<Vec3>,
}

impl TriMesh {
    /// Validates indices and face areas, then derives normals.
    ///
    /// Vertices not referenced by any face get the +z normal.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Result<Self> {
        validate_faces(&vertices, &faces)?;
        let normals = area_weighted_normals(&vertices, &faces);
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    /// Mesh with caller-supplied normals (normalized here).
    pub fn with_normals(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>, normals: Vec<Vec3>) -> Result<Self> {
        validate_faces(&vertices, &faces)?;
        if normals.len() != vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} normals for {} vertices",
                normals.len(),
                vertices.len()
            )));
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    Ok(n / len)
                } else {
                    Err(Error::InvalidMesh("zero-length normal".into()))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vertices,
            faces,
            normals,
        })
    }

    pub fn face_vertices(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.face_vertices(f);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    /// Mean length of the edges incident to each vertex. Isolated vertices get
    /// the mesh-wide mean edge length (0 for a mesh without faces).
    pub fn mean_incident_edge_lengths(&self) -> Vec<f64> {
        let n = self.vertices.len();
        let mut sum = vec![0.0; n];
        let mut count = vec![0usize; n];
        let mut total = 0.0;
        let mut total_count = 0usize;
        for face in &self.faces {
            for e in 0..3 {
                let a = face[e] as usize;
                let b = face[(e + 1) % 3] as usize;
                let len = (self.vertices[a] - self.vertices[b]).norm();
                sum[a] += len;
                sum[b] += len;
                count[a] += 1;
                count[b] += 1;
                total += len;
                total_count += 1;
            }
        }
        let global = if total_count > 0 {
            total / total_count as f64
        } else {
            0.0
        };
        sum.iter()
            .zip(&count)
            .map(|(&s, &c)| if c > 0 { s / c as f64 } else { global })
            .collect()
    }

    /// Axis-aligned bounds of the vertices, `None` for an empty mesh.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Same topology, new positions; normals are recomputed.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::InvalidMesh(format!(
                "{} positions for {} vertices",
                vertices.len(),
                self.vertices.len()
            )));
        }
        Self::new(vertices, self.faces.clone())
    }
}

fn validate_faces(vertices: &[Vec3], faces: &[[u32; 3]]) -> Result<()> {
    for (fi, face) in faces.iter().enumerate() {
        for &i in face {
            if i as usize >= vertices.len() {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex {i} but the mesh has {} vertices",
                    vertices.len()
                )));
            }
        }
        let [a, b, c] = face.map(|i| vertices[i as usize]);
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        if area <= MIN_FACE_AREA {
            return Err(Error::InvalidMesh(format!(
                "face {fi} has area {area:e} below {MIN_FACE_AREA:e}"
            )));
        }
    }
    Ok(())
}

fn area_weighted_normals(vertices: &[Vec3], faces: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for face in faces {
        let [a, b, c] = face.map(|i| vertices[i as usize]);
        // |cross| is twice the area, so the raw cross product is already area-weighted.
        let n = (b - a).cross(&(c - a));
        for &i in face {
            acc[i as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| {
            let len = n.norm();
            if len > 0.0 {
                n / len
            } else {
                Vec3::z()
            }
        })
        .collect()
}
