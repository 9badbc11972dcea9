//! Volumetric density d(p) = Σ α_g exp(-½ (p-μ)ᵀ Σ⁻¹ (p-μ)).

use std::collections::HashMap;

use crate::math::{Mat3, Vec3};
use crate::scene::GaussianCloud;

/// Contributions α·exp(-q/2) below this value are dropped.
pub const DENSITY_FLOOR: f64 = 1e-9;
/// Gaussians whose cutoff box would span more grid cells than this go to a shared list.
const MAX_CELLS_PER_GAUSSIAN: usize = 512;

#[derive(Debug, Clone)]
struct Kernel {
    mean: Vec3,
    precision: Mat3,
    opacity: f64,
    /// Squared Mahalanobis radius where the contribution reaches DENSITY_FLOOR.
    cutoff_sq: f64,
    /// Axis-aligned half extent of the cutoff ellipsoid.
    half_extent: Vec3,
}

impl Kernel {
    fn eval(&self, p: &Vec3) -> f64 {
        let d = p - self.mean;
        let q = d.dot(&(self.precision * d));
        if q > self.cutoff_sq {
            0.0
        } else {
            self.opacity * (-0.5 * q).exp()
        }
    }
}

fn kernels(cloud: &GaussianCloud) -> Vec<Kernel> {
    cloud
        .gaussians
        .iter()
        .filter_map(|g| {
            let cov = g.covariance().ok()?;
            let precision = cov.try_inverse()?;
            let opacity = g.opacity();
            if !(opacity > DENSITY_FLOOR) {
                return None;
            }
            let cutoff_sq = 2.0 * (opacity / DENSITY_FLOOR).ln();
            let r = cutoff_sq.sqrt();
            Some(Kernel {
                mean: g.mean,
                precision,
                opacity,
                cutoff_sq,
                half_extent: Vec3::new(
                    r * cov[(0, 0)].max(0.0).sqrt(),
                    r * cov[(1, 1)].max(0.0).sqrt(),
                    r * cov[(2, 2)].max(0.0).sqrt(),
                ),
            })
        })
        .collect()
}

/// Direct evaluation over every Gaussian (with the same cutoff as [`DensityField`]).
pub fn density_at(cloud: &GaussianCloud, p: &Vec3) -> f64 {
    kernels(cloud).iter().map(|k| k.eval(p)).sum()
}

/// Density evaluator with a uniform grid over the Gaussians' cutoff boxes.
#[derive(Debug, Clone)]
pub struct DensityField {
    kernels: Vec<Kernel>,
    cell: f64,
    grid: HashMap<[i64; 3], Vec<u32>>,
    global: Vec<u32>,
}

impl DensityField {
    pub fn new(cloud: &GaussianCloud) -> Self {
        let kernels = kernels(cloud);

        let mut extents: Vec<f64> = kernels.iter().map(|k| k.half_extent.max()).collect();
        let cell = if extents.is_empty() {
            1.0
        } else {
            let mid = extents.len() / 2;
            let (_, median, _) = extents.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
            (*median * 2.0).max(1e-9)
        };

        let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        let mut global = Vec::new();
        for (i, k) in kernels.iter().enumerate() {
            let lo = cell_of(&(k.mean - k.half_extent), cell);
            let hi = cell_of(&(k.mean + k.half_extent), cell);
            let span: i128 = (0..3).map(|a| (hi[a] - lo[a] + 1) as i128).product();
            if span > MAX_CELLS_PER_GAUSSIAN as i128 {
                global.push(i as u32);
                continue;
            }
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        grid.entry([x, y, z]).or_default().push(i as u32);
                    }
                }
            }
        }
        Self {
            kernels,
            cell,
            grid,
            global,
        }
    }

    pub fn density(&self, p: &Vec3) -> f64 {
        let mut sum = 0.0;
        if let Some(list) = self.grid.get(&cell_of(p, self.cell)) {
            for &i in list {
                sum += self.kernels[i as usize].eval(p);
            }
        }
        for &i in &self.global {
            sum += self.kernels[i as usize].eval(p);
        }
        sum
    }
}

fn cell_of(p: &Vec3, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CloudRole, Gaussian3D};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(gs: Vec<Gaussian3D>) -> GaussianCloud {
        GaussianCloud::new(gs, 0, CloudRole::Unconstrained).unwrap()
    }

    fn opaque_unit_at(mean: Vec3) -> Gaussian3D {
        let mut g = Gaussian3D::isotropic(mean, 1.0, 0.5);
        g.opacity_logit = 60.0;
        g
    }

    #[test]
    fn value_at_mean_is_opacity() {
        let c = cloud(vec![opaque_unit_at(Vec3::new(1.0, 2.0, 3.0))]);
        assert!((density_at(&c, &Vec3::new(1.0, 2.0, 3.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_in_gaussians() {
        let g = Gaussian3D::isotropic(Vec3::zeros(), 0.5, 0.5);
        let c = cloud(vec![g.clone(), g]);
        assert!((density_at(&c, &Vec3::zeros()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_distance_value() {
        let c = cloud(vec![opaque_unit_at(Vec3::zeros())]);
        let d = density_at(&c, &Vec3::new(0.0, 1.0, 0.0));
        assert!((d - (-0.5f64).exp()).abs() < 1e-12);
        assert!((d - 0.60653).abs() < 1e-5);
    }

    #[test]
    fn grid_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let gs: Vec<_> = (0..300)
            .map(|_| {
                let mut g = Gaussian3D::isotropic(
                    Vec3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
                    rng.gen_range(0.05..2.0),
                    rng.gen_range(0.05..0.95),
                );
                g.log_scales.x += rng.gen_range(-1.0..1.0);
                g.rotation = nalgebra::Quaternion::new(
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                );
                g
            })
            .collect();
        let c = cloud(gs);
        let field = DensityField::new(&c);
        for _ in 0..500 {
            let p = Vec3::new(rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0), rng.gen_range(-7.0..7.0));
            assert!((field.density(&p) - density_at(&c, &p)).abs() < 1e-12);
        }
    }
}
