//! Small synthetic scenes for smoke tests, demos and the acceptance suite.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::io;
use crate::math::{self, Vec3};
use crate::pipeline::{build_scene, BuildConfig, FrostingScene};
use crate::render::Camera;
use crate::scene::{sh, CloudRole, Gaussian3D, GaussianCloud, TriMesh};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub subdivisions: usize,
    pub radius: f64,
    pub cloud_size: usize,
    pub budget: usize,
    pub seed: u64,
    pub sh_degree: usize,
    pub cameras: usize,
    pub width: u32,
    pub height: u32,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            subdivisions: 1,
            radius: 1.0,
            cloud_size: 600,
            budget: 1000,
            seed: 7,
            sh_degree: 1,
            cameras: 20,
            width: 64,
            height: 64,
        }
    }
}

pub struct ToyScene {
    pub unconstrained: GaussianCloud,
    pub regularized: GaussianCloud,
    pub cameras: Vec<Camera>,
    pub scene: FrostingScene,
}

/// Icosahedron subdivided `level` times and projected onto a sphere.
pub fn icosphere(level: usize, radius: f64) -> Result<TriMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..level {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) / 2.0).normalize());
                verts.len() as u32 - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriMesh::new(verts.into_iter().map(|v| v * radius).collect(), faces)
}

/// Square grid in the z = 0 plane, `n` cells per side, spanning [0, size]².
pub fn plane(n: usize, size: f64) -> Result<TriMesh> {
    let mut verts = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            verts.push(Vec3::new(size * i as f64 / n as f64, size * j as f64 / n as f64, 0.0));
        }
    }
    let mut faces = Vec::new();
    let idx = |i: usize, j: usize| (j * (n + 1) + i) as u32;
    for j in 0..n {
        for i in 0..n {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    TriMesh::new(verts, faces)
}

fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Smoothly varying color on the unit sphere.
pub fn toy_color(dir: &Vec3) -> [f64; 3] {
    [
        0.5 + 0.4 * dir.x,
        0.5 + 0.4 * (3.0 * dir.y).sin(),
        0.5 + 0.4 * dir.z * dir.x,
    ]
}

fn sh_for_color(color: [f64; 3], degree: usize) -> Vec<f64> {
    let mut out = vec![0.0; sh::coeff_count(degree)];
    for c in 0..3 {
        out[c] = (color[c] - 0.5) / sh::SH_C0;
    }
    out
}

/// Unconstrained cloud scattered around the sphere and a surface-hugging regularized one.
pub fn toy_clouds(cfg: &ToyConfig) -> Result<(GaussianCloud, GaussianCloud)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut loose = Vec::with_capacity(cfg.cloud_size);
    let mut tight = Vec::with_capacity(cfg.cloud_size);
    let spacing = cfg.radius * (4.0 * std::f64::consts::PI / cfg.cloud_size as f64).sqrt();
    for _ in 0..cfg.cloud_size {
        let dir = random_unit(&mut rng);
        let color = toy_color(&dir);
        let offset = rng.gen_range(-0.06..0.06) * cfg.radius;
        let mut g = Gaussian3D::isotropic(dir * (cfg.radius + offset), 0.5 * spacing, 0.8);
        g.sh = sh_for_color(color, cfg.sh_degree);
        loose.push(g);
        let mut g = Gaussian3D::isotropic(dir * cfg.radius, 0.4 * spacing, 0.9);
        g.sh = sh_for_color(color, cfg.sh_degree);
        tight.push(g);
    }
    Ok((
        GaussianCloud::new(loose, cfg.sh_degree, CloudRole::Unconstrained)?,
        GaussianCloud::new(tight, cfg.sh_degree, CloudRole::Regularized)?,
    ))
}

/// Cameras on a ring around the origin at varying elevation.
pub fn ring_cameras(count: usize, distance: f64, width: u32, height: u32) -> Result<Vec<Camera>> {
    (0..count)
        .map(|i| {
            let az = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            let el = 0.45 * (3.0 * az).sin();
            let eye = Vec3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * distance;
            Camera::look_at(eye, Vec3::zeros(), Vec3::z(), 50f64.to_radians(), width, height)
        })
        .collect()
}

pub fn toy_scene(cfg: &ToyConfig) -> Result<ToyScene> {
    let mesh = icosphere(cfg.subdivisions, cfg.radius)?;
    let (unconstrained, regularized) = toy_clouds(cfg)?;
    let cameras = ring_cameras(cfg.cameras, 4.0 * cfg.radius, cfg.width, cfg.height)?;
    let build = BuildConfig {
        budget: cfg.budget,
        seed: cfg.seed,
        camera_centers: cameras.iter().map(|c| c.center()).collect(),
        ..Default::default()
    };
    let scene = build_scene(&unconstrained, &regularized, &mesh, &build)?;
    Ok(ToyScene {
        unconstrained,
        regularized,
        cameras,
        scene,
    })
}

/// Writes the toy inputs (two PLY clouds, the mesh and a camera file) into `dir`.
pub fn write_toy_inputs(cfg: &ToyConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    let mesh = icosphere(cfg.subdivisions, cfg.radius)?;
    let (unconstrained, regularized) = toy_clouds(cfg)?;
    let cameras = ring_cameras(cfg.cameras, 4.0 * cfg.radius, cfg.width, cfg.height)?;
    io::write_gaussian_ply(&dir.join("unconstrained.ply"), &unconstrained)?;
    io::write_gaussian_ply(&dir.join("regularized.ply"), &regularized)?;
    io::write_obj(&dir.join("mesh.obj"), &mesh)?;
    io::write_cameras(&dir.join("cameras.json"), &cameras)?;
    Ok(())
}

/// Random appearance for re-initialization experiments.
pub fn randomize_appearance(scene: &mut FrostingScene, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in &mut scene.gaussians {
        for v in &mut g.sh {
            *v = rng.gen_range(-0.5..0.5);
        }
        g.opacity_logit = math::logit(rng.gen_range(0.05..0.3));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_counts() {
        let m = icosphere(2, 2.0).unwrap();
        assert_eq!(m.faces.len(), 320);
        assert_eq!(m.vertices.len(), 162);
        assert!(m.vertices.iter().all(|v| (v.norm() - 2.0).abs() < 1e-12));
        for (v, n) in m.vertices.iter().zip(&m.normals) {
            assert!(v.normalize().dot(n) > 0.95);
        }
    }

    #[test]
    fn plane_counts() {
        let m = plane(3, 1.0).unwrap();
        assert_eq!(m.faces.len(), 18);
        assert!(m.normals.iter().all(|n| (n - Vec3::z()).norm() < 1e-12));
    }
}
