//! Placement and initialization of a fixed budget of Gaussians inside the layer.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cells::{contracted_volume, ContractionParams, FrostingLayer};
use crate::error::{Error, Result};
use crate::frosted::{position_in_cell, FrostedGaussian};
use crate::kdtree::KdTree;
use crate::math::{self, Vec3};
use crate::scene::GaussianCloud;

pub const INITIAL_OPACITY: f64 = 0.1;
pub const LOGIT_FLOOR: f64 = 1e-8;
pub const SCALE_NEIGHBORS: usize = 3;
const MIN_NEIGHBOR_DISTANCE: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub budget: usize,
    pub seed: u64,
    pub uniform_fraction: f64,
    pub contraction: Option<ContractionParams>,
}

impl SamplingConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        Self {
            budget,
            seed,
            uniform_fraction: 0.5,
            contraction: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::InvalidConfig("budget must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.uniform_fraction) {
            return Err(Error::InvalidConfig(format!(
                "uniform_fraction {} not in [0, 1]",
                self.uniform_fraction
            )));
        }
        Ok(())
    }

    /// Number of samples drawn with uniform cell probabilities.
    pub fn uniform_count(&self) -> usize {
        ((self.uniform_fraction * self.budget as f64).ceil() as usize).min(self.budget)
    }
}

/// Flat Dirichlet draw on the 6-simplex (normalized unit exponentials).
pub fn sample_simplex6<R: Rng + ?Sized>(rng: &mut R) -> [f64; 6] {
    loop {
        let mut w = [0.0; 6];
        for x in &mut w {
            // 1 - U lies in (0, 1], so the log is finite.
            *x = -(1.0 - rng.gen::<f64>()).ln();
        }
        let sum: f64 = w.iter().sum();
        if sum > 0.0 {
            for x in &mut w {
                *x /= sum;
            }
            return w;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledCenter {
    pub cell: usize,
    pub bary: [f64; 6],
}

pub fn sample_centers(layer: &FrostingLayer, cfg: &SamplingConfig) -> Result<Vec<SampledCenter>> {
    cfg.validate()?;
    if layer.cells.is_empty() {
        return Err(Error::EmptyLayer);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_uniform = cfg.uniform_count();
    let mut out = Vec::with_capacity(cfg.budget);
    for _ in 0..n_uniform {
        let cell = rng.gen_range(0..layer.cells.len());
        out.push(SampledCenter {
            cell,
            bary: sample_simplex6(&mut rng),
        });
    }
    if n_uniform < cfg.budget {
        let weights: Vec<f64> = layer
            .cells
            .iter()
            .map(|c| match &cfg.contraction {
                Some(p) => contracted_volume(c, p),
                None => c.volume,
            })
            .collect();
        let dist = WeightedIndex::new(&weights).map_err(|_| Error::ZeroVolumeLayer)?;
        for _ in n_uniform..cfg.budget {
            let cell = dist.sample(&mut rng);
            out.push(SampledCenter {
                cell,
                bary: sample_simplex6(&mut rng),
            });
        }
    }
    Ok(out)
}

/// Appearance from the nearest unconstrained Gaussian; opacity, scale and
/// rotation restarted (opacity 0.1, isotropic scale from the 3 nearest samples).
pub fn initialize_gaussians(
    centers: &[SampledCenter],
    layer: &FrostingLayer,
    unconstrained: &GaussianCloud,
) -> Result<Vec<FrostedGaussian>> {
    if unconstrained.is_empty() {
        return Err(Error::TooFewGaussians { needed: 1, got: 0 });
    }
    let logits: Vec<[f64; 6]> = centers
        .iter()
        .map(|c| c.bary.map(|b| (b + LOGIT_FLOOR).ln()))
        .collect();
    let positions: Vec<[f64; 3]> = centers
        .iter()
        .zip(&logits)
        .map(|(c, l)| {
            let cell = layer.cell(c.cell)?;
            let p = position_in_cell(cell, &math::softmax6(l));
            Ok([p.x, p.y, p.z])
        })
        .collect::<Result<_>>()?;

    let donors = KdTree::new(&unconstrained.means());
    let samples = KdTree::new(&positions);
    let fallback_scale = fallback_scale(layer, centers.len());
    let opacity_logit = math::logit(INITIAL_OPACITY);

    Ok(positions
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (donor, _) = donors.nearest(p, None).expect("non-empty cloud");
            let neighbors = samples.k_nearest(p, SCALE_NEIGHBORS, Some(i));
            let scale = if neighbors.is_empty() {
                fallback_scale
            } else {
                neighbors.iter().map(|(_, d)| d).sum::<f64>() / neighbors.len() as f64
            };
            let scale = scale.max(MIN_NEIGHBOR_DISTANCE);
            FrostedGaussian {
                cell: centers[i].cell as u32,
                bary_logits: logits[i],
                log_scales: Vec3::repeat(scale.ln()),
                rotation: math::identity_quat(),
                opacity_logit,
                sh: unconstrained.gaussians[donor].sh.clone(),
                residual_rotation: math::identity_quat(),
            }
        })
        .collect())
}

/// Scale for a lone sample: cube root of the layer volume per Gaussian.
fn fallback_scale(layer: &FrostingLayer, count: usize) -> f64 {
    (layer.total_volume / count.max(1) as f64).cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::PrismaticCell;
    use crate::scene::{CloudRole, Gaussian3D};

    fn two_cell_layer(h0: f64, h1: f64) -> FrostingLayer {
        let tri = [Vec3::zeros(), Vec3::x(), Vec3::y()];
        let shift = Vec3::new(5.0, 0.0, 0.0);
        let cells = vec![
            PrismaticCell::new(0, tri.map(|p| p + Vec3::z() * h0), tri),
            PrismaticCell::new(1, tri.map(|p| p + shift + Vec3::z() * h1), tri.map(|p| p + shift)),
        ];
        let total_volume = cells.iter().map(|c| c.volume).sum();
        FrostingLayer {
            delta_in: vec![],
            delta_out: vec![],
            cells,
            total_volume,
        }
    }

    #[test]
    fn simplex_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut mean = [0.0; 6];
        let n = 200_000;
        for _ in 0..n {
            let w = sample_simplex6(&mut rng);
            assert!(w.iter().all(|&x| x >= 0.0));
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for k in 0..6 {
                mean[k] += w[k] / n as f64;
            }
        }
        for m in mean {
            assert!((m - 1.0 / 6.0).abs() < 0.002);
        }
        let a: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..5).map(|_| sample_simplex6(&mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = ChaCha8Rng::seed_from_u64(9);
            (0..5).map(|_| sample_simplex6(&mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn uniform_mode_ignores_volumes() {
        let layer = two_cell_layer(1.0, 5.0);
        let cfg = SamplingConfig {
            uniform_fraction: 1.0,
            ..SamplingConfig::new(60_000, 4)
        };
        let centers = sample_centers(&layer, &cfg).unwrap();
        let ones = centers.iter().filter(|c| c.cell == 1).count() as f64 / 60_000.0;
        assert!((ones - 0.5).abs() < 0.01);
    }

    #[test]
    fn zero_volume_cells_get_no_volume_samples() {
        let layer = two_cell_layer(1.0, 0.0);
        let cfg = SamplingConfig {
            uniform_fraction: 0.0,
            ..SamplingConfig::new(1000, 4)
        };
        assert!(sample_centers(&layer, &cfg).unwrap().iter().all(|c| c.cell == 0));
    }

    #[test]
    fn single_sample_and_errors() {
        let layer = two_cell_layer(1.0, 1.0);
        assert_eq!(sample_centers(&layer, &SamplingConfig::new(1, 0)).unwrap().len(), 1);
        let empty = FrostingLayer {
            delta_in: vec![],
            delta_out: vec![],
            cells: vec![],
            total_volume: 0.0,
        };
        assert!(matches!(sample_centers(&empty, &SamplingConfig::new(3, 0)), Err(Error::EmptyLayer)));
        let flat = two_cell_layer(0.0, 0.0);
        let cfg = SamplingConfig {
            uniform_fraction: 0.0,
            ..SamplingConfig::new(3, 0)
        };
        assert!(matches!(sample_centers(&flat, &cfg), Err(Error::ZeroVolumeLayer)));
    }

    #[test]
    fn initialization_resets_shape_and_copies_color() {
        let layer = two_cell_layer(1.0, 2.0);
        let mut donor = Gaussian3D::isotropic(Vec3::new(2.0, 2.0, 2.0), 0.3, 0.9);
        donor.sh = vec![0.1, 0.2, 0.3];
        let cloud = GaussianCloud::new(vec![donor], 0, CloudRole::Unconstrained).unwrap();
        let centers = sample_centers(&layer, &SamplingConfig::new(50, 2)).unwrap();
        let gs = initialize_gaussians(&centers, &layer, &cloud).unwrap();
        assert_eq!(gs.len(), 50);
        for (g, c) in gs.iter().zip(&centers) {
            assert_eq!(g.sh, vec![0.1, 0.2, 0.3]);
            assert!((g.opacity() - 0.1).abs() < 1e-9);
            assert_eq!(g.rotation, math::identity_quat());
            assert_eq!(g.log_scales.x, g.log_scales.y);
            let p = g.position(&layer).unwrap();
            let exact = position_in_cell(&layer.cells[c.cell], &c.bary);
            assert!((p - exact).norm() < 1e-6);
        }
    }
}
