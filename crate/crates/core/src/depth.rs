//! Geometric complexity score and the recommended Poisson octree depth.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::scene::GaussianCloud;

pub const DEFAULT_GAMMA: f64 = 100.0;
/// Upper clamp for the recommended depth.
pub const DEFAULT_DEPTH: i32 = 10;
pub const MIN_DEPTH: i32 = 1;
/// Minimum cloud size for a meaningful 0.1-quantile.
pub const MIN_GAUSSIANS_FOR_SCORE: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DepthAdvice {
    pub cs: f64,
    #[serde(rename = "L")]
    pub l_box: f64,
    pub gamma: f64,
    pub depth: i32,
    pub default_depth: i32,
}

/// Distance from every mean to its nearest other mean.
pub fn nearest_neighbor_distances(cloud: &GaussianCloud) -> Result<Vec<f64>> {
    if cloud.len() < 2 {
        return Err(Error::TooFewGaussians {
            needed: 2,
            got: cloud.len(),
        });
    }
    let points = cloud.means();
    let tree = KdTree::new(&points);
    Ok(points
        .par_iter()
        .enumerate()
        .map(|(i, p)| tree.nearest(p, Some(i)).map(|(_, d)| d).unwrap_or(0.0))
        .collect())
}

/// Nearest-rank quantile: element ⌈q·n⌉−1 of the ascending list.
pub fn nearest_rank_index(n: usize, numerator: usize, denominator: usize) -> usize {
    (n * numerator).div_ceil(denominator).max(1) - 1
}

/// Longest edge of the axis-aligned bounding box of the means.
pub fn longest_bbox_edge(cloud: &GaussianCloud) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for g in &cloud.gaussians {
        for a in 0..3 {
            lo[a] = lo[a].min(g.mean[a]);
            hi[a] = hi[a].max(g.mean[a]);
        }
    }
    (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max)
}

/// Fills `cs` and `l_box`; `depth` is computed with the default γ.
pub fn complexity_score(cloud: &GaussianCloud) -> Result<DepthAdvice> {
    advise(cloud, DEFAULT_GAMMA)
}

pub fn advise(cloud: &GaussianCloud, gamma: f64) -> Result<DepthAdvice> {
    if cloud.len() < MIN_GAUSSIANS_FOR_SCORE {
        return Err(Error::TooFewGaussians {
            needed: MIN_GAUSSIANS_FOR_SCORE,
            got: cloud.len(),
        });
    }
    let l_box = longest_bbox_edge(cloud);
    if l_box <= 1e-12 {
        return Err(Error::DegenerateBoundingBox(l_box));
    }
    let mut normalized: Vec<f64> = nearest_neighbor_distances(cloud)?
        .into_iter()
        .map(|d| d / l_box)
        .collect();
    normalized.sort_by(f64::total_cmp);
    let cs = normalized[nearest_rank_index(normalized.len(), 1, 10)];
    let depth = optimal_depth(cs, gamma)?;
    Ok(DepthAdvice {
        cs,
        l_box,
        gamma,
        depth,
        default_depth: DEFAULT_DEPTH,
    })
}

/// ⌊−log2(γ·cs)⌋ clamped to [1, 10].
pub fn optimal_depth(cs: f64, gamma: f64) -> Result<i32> {
    if !(cs > 0.0) || !(gamma > 0.0) {
        return Err(Error::NonPositiveInput(format!("cs = {cs}, gamma = {gamma}")));
    }
    let raw = (-(gamma * cs).log2()).floor();
    Ok(raw.clamp(MIN_DEPTH as f64, DEFAULT_DEPTH as f64) as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;
    use crate::scene::{CloudRole, Gaussian3D};

    fn cloud_of(points: &[[f64; 3]]) -> GaussianCloud {
        let gs = points
            .iter()
            .map(|p| Gaussian3D::isotropic(Vec3::new(p[0], p[1], p[2]), 0.1, 0.5))
            .collect();
        GaussianCloud::new(gs, 0, CloudRole::Regularized).unwrap()
    }

    fn grid(n: usize) -> Vec<[f64; 3]> {
        let mut pts = Vec::new();
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    pts.push([x as f64, y as f64, z as f64]);
                }
            }
        }
        pts
    }

    #[test]
    fn pair_distance() {
        let d = nearest_neighbor_distances(&cloud_of(&[[0.0; 3], [3.0, 0.0, 0.0]])).unwrap();
        assert_eq!(d, vec![3.0, 3.0]);
    }

    #[test]
    fn single_gaussian_is_too_few() {
        assert!(matches!(
            nearest_neighbor_distances(&cloud_of(&[[0.0; 3]])),
            Err(Error::TooFewGaussians { .. })
        ));
    }

    #[test]
    fn lattice_distances_are_one() {
        let d = nearest_neighbor_distances(&cloud_of(&grid(4))).unwrap();
        assert!(d.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn unit_grid_score() {
        let advice = complexity_score(&cloud_of(&grid(10))).unwrap();
        assert_eq!(advice.l_box, 9.0);
        assert_eq!(advice.cs, 1.0 / 9.0);
        // floor(-log2(100/9)) = -4, clamped up to 1.
        assert_eq!(advice.depth, 1);
    }

    #[test]
    fn paired_points_set_the_quantile() {
        // 90 lattice points at unit spacing plus five isolated pairs at half spacing.
        let mut pts = Vec::new();
        for x in 0..9 {
            for y in 0..10 {
                pts.push([x as f64, y as f64, 0.0]);
            }
        }
        for p in 0..5 {
            let x = 2.0 * p as f64;
            pts.push([x, 0.0, 10.0]);
            pts.push([x + 0.5, 0.0, 10.0]);
        }
        let advice = complexity_score(&cloud_of(&pts)).unwrap();
        assert_eq!(advice.l_box, 10.0);
        assert_eq!(advice.cs, 0.5 / 10.0);
    }

    #[test]
    fn depth_formula() {
        assert_eq!(optimal_depth(2f64.powi(-10), 4.0).unwrap(), 8);
        assert_eq!(optimal_depth(0.003, 1.0).unwrap(), 8);
        assert_eq!(optimal_depth(2f64.powi(-14), 1.0).unwrap(), 10);
        assert!(optimal_depth(0.0, 1.0).is_err());
        assert!(optimal_depth(1.0, -1.0).is_err());
    }

    #[test]
    fn degenerate_box() {
        let pts = vec![[1.0, 2.0, 3.0]; 12];
        assert!(matches!(
            complexity_score(&cloud_of(&pts)),
            Err(Error::DegenerateBoundingBox(_))
        ));
    }

    #[test]
    fn nearest_rank() {
        assert_eq!(nearest_rank_index(1000, 1, 10), 99);
        assert_eq!(nearest_rank_index(100, 1, 10), 9);
        assert_eq!(nearest_rank_index(11, 1, 10), 1);
        assert_eq!(nearest_rank_index(1, 1, 10), 0);
    }
}
