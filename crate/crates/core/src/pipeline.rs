//! End-to-end scene assembly: layer construction, sampling, rendering and deformation.

use log::info;
use rayon::prelude::*;

use crate::cells::{build_cells, ContractionParams, FrostingLayer};
use crate::error::{Error, Result};
use crate::frosted::{adjusted_sh_eval, transfer_deformation, FrostedGaussian};
use crate::math::Vec3;
use crate::render::{self, Camera, Image, PreparedGaussian};
use crate::sampling::{initialize_gaussians, sample_centers, SamplingConfig};
use crate::scene::{sh, GaussianCloud, TriMesh};
use crate::thickness::{compute_shifts, grow_shifts, ThicknessConfig, DEFAULT_GROW_STEPS};

pub const DEFAULT_BUDGET: usize = 2_000_000;
pub const DEFAULT_SEED: u64 = 0;

/// Base mesh, frosting layer and the Gaussians living in it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrostingScene {
    pub mesh: TriMesh,
    pub layer: FrostingLayer,
    pub gaussians: Vec<FrostedGaussian>,
    pub sh_degree: usize,
    pub background: [f64; 3],
    pub contraction: ContractionParams,
    pub seed: u64,
}

impl FrostingScene {
    pub fn validate(&self) -> Result<()> {
        if self.layer.cells.len() != self.mesh.faces.len() {
            return Err(Error::Internal(format!(
                "{} cells for {} faces",
                self.layer.cells.len(),
                self.mesh.faces.len()
            )));
        }
        let expected = sh::coeff_count(self.sh_degree);
        for g in &self.gaussians {
            if g.cell as usize >= self.layer.cells.len() {
                return Err(Error::BadCellIndex {
                    index: g.cell as usize,
                    count: self.layer.cells.len(),
                });
            }
            if g.sh.len() != expected {
                return Err(Error::DegreeMismatch {
                    degree: self.sh_degree,
                    expected,
                    got: g.sh.len(),
                });
            }
        }
        Ok(())
    }

    /// World-space means, covariances, opacities and view-resolved colors.
    pub fn prepare(&self, cam: &Camera) -> Result<Vec<PreparedGaussian>> {
        let eye = cam.center();
        self.gaussians
            .par_iter()
            .map(|g| {
                let mean = g.position(&self.layer)?;
                let dir = view_direction(&mean, &eye);
                Ok(PreparedGaussian {
                    mean,
                    cov: g.covariance()?,
                    opacity: g.opacity(),
                    color: adjusted_sh_eval(g, self.sh_degree, &dir)?,
                })
            })
            .collect()
    }

    pub fn render(&self, cam: &Camera) -> Result<Image> {
        Ok(render::render_gaussians(&self.prepare(cam)?, cam, self.background))
    }

    pub fn render_brute(&self, cam: &Camera) -> Result<Image> {
        Ok(render::render_gaussians_brute(&self.prepare(cam)?, cam, self.background))
    }
}

pub(crate) fn view_direction(mean: &Vec3, eye: &Vec3) -> Vec3 {
    let d = mean - eye;
    let n = d.norm();
    if n > 0.0 {
        d / n
    } else {
        Vec3::z()
    }
}

pub fn render(scene: &FrostingScene, cam: &Camera) -> Result<Image> {
    scene.render(cam)
}

pub fn render_brute(scene: &FrostingScene, cam: &Camera) -> Result<Image> {
    scene.render_brute(cam)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildConfig {
    pub thickness: ThicknessConfig,
    pub grow_steps: usize,
    pub budget: usize,
    pub seed: u64,
    pub uniform_fraction: f64,
    /// Camera centers; the contraction falls back to the mesh when empty.
    pub camera_centers: Vec<Vec3>,
    pub background: [f64; 3],
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            thickness: ThicknessConfig::default(),
            grow_steps: DEFAULT_GROW_STEPS,
            budget: DEFAULT_BUDGET,
            seed: DEFAULT_SEED,
            uniform_fraction: 0.5,
            camera_centers: Vec::new(),
            background: [0.0; 3],
        }
    }
}

/// Thickness estimation, growth, cell construction and Gaussian sampling.
pub fn build_scene(
    unconstrained: &GaussianCloud,
    regularized: &GaussianCloud,
    mesh: &TriMesh,
    cfg: &BuildConfig,
) -> Result<FrostingScene> {
    cfg.thickness.validate()?;
    if mesh.faces.is_empty() {
        return Err(Error::InvalidMesh("mesh has no faces".into()));
    }
    let targets = compute_shifts(unconstrained, regularized, mesh, &cfg.thickness)?;
    let grown = grow_shifts(mesh, &targets, cfg.grow_steps)?;
    let layer = build_cells(mesh, &grown)?;
    let contraction = if cfg.camera_centers.is_empty() {
        ContractionParams::from_mesh(mesh)?
    } else {
        ContractionParams::from_positions(&cfg.camera_centers)?
    };
    let sampling = SamplingConfig {
        budget: cfg.budget,
        seed: cfg.seed,
        uniform_fraction: cfg.uniform_fraction,
        contraction: Some(contraction),
    };
    let centers = sample_centers(&layer, &sampling)?;
    let gaussians = initialize_gaussians(&centers, &layer, unconstrained)?;
    info!(
        "built layer: {} cells, volume {:.6e}, {} gaussians",
        layer.cells.len(),
        layer.total_volume,
        gaussians.len()
    );
    Ok(FrostingScene {
        mesh: mesh.clone(),
        layer,
        gaussians,
        sh_degree: unconstrained.sh_degree,
        background: cfg.background,
        contraction,
        seed: cfg.seed,
    })
}

/// Rebuilds the cells on a deformed copy of the base mesh (same topology) and
/// transfers every Gaussian's shape; positions follow through the barycentrics.
pub fn deform_scene(scene: &FrostingScene, deformed: &TriMesh) -> Result<FrostingScene> {
    if deformed.vertices.len() != scene.mesh.vertices.len()
        || deformed.faces.len() != scene.mesh.faces.len()
        || deformed.faces != scene.mesh.faces
    {
        return Err(Error::TopologyMismatch {
            expected_vertices: scene.mesh.vertices.len(),
            expected_faces: scene.mesh.faces.len(),
            got_vertices: deformed.vertices.len(),
            got_faces: deformed.faces.len(),
        });
    }
    let layer = FrostingLayer::from_deltas(deformed, scene.layer.delta_in.clone(), scene.layer.delta_out.clone())?;
    let gaussians = scene
        .gaussians
        .par_iter()
        .map(|g| {
            let c = g.cell as usize;
            transfer_deformation(g, scene.layer.cell(c)?, layer.cell(c)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FrostingScene {
        mesh: deformed.clone(),
        layer,
        gaussians,
        ..scene.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    #[test]
    fn build_render_deform_smoke() {
        let t = toy::toy_scene(&toy::ToyConfig {
            budget: 300,
            ..Default::default()
        })
        .unwrap();
        let scene = &t.scene;
        scene.validate().unwrap();
        assert_eq!(scene.gaussians.len(), 300);
        let img = scene.render(&t.cameras[0]).unwrap();
        assert!(img.data.iter().any(|&v| v > 0.0));

        let moved: Vec<Vec3> = scene.mesh.vertices.iter().map(|v| v + Vec3::new(0.5, 0.0, 0.0)).collect();
        let deformed = scene.mesh.with_positions(moved).unwrap();
        let out = deform_scene(scene, &deformed).unwrap();
        for (a, b) in scene.gaussians.iter().zip(&out.gaussians) {
            let pa = a.position(&scene.layer).unwrap();
            let pb = b.position(&out.layer).unwrap();
            assert!((pb - pa - Vec3::new(0.5, 0.0, 0.0)).norm() < 1e-9);
        }

        let fewer = TriMesh::new(scene.mesh.vertices[..3].to_vec(), vec![[0, 1, 2]]).unwrap();
        let err = deform_scene(scene, &fewer).unwrap_err();
        assert!(matches!(err, Error::TopologyMismatch { .. }));
    }
}
