//! Per-vertex inner/outer shifts of the frosting layer.
//!
//! For each vertex the normal-direction std of the closest regularized
//! Gaussian bounds a first search interval; the regularized density's level
//! set inside it gives a proposal interval J, which is then searched on the
//! unconstrained density to obtain the final shifts.

use std::collections::HashMap;

use log::info;
use rayon::prelude::*;

use crate::cells::{FrostingLayer, PrismaticCell};
use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::math::{Mat3, Vec3};
use crate::scene::{DensityField, GaussianCloud, TriMesh};

pub const DEFAULT_LAMBDA: f64 = 0.01;
pub const DEFAULT_K: f64 = 3.0;
pub const DEFAULT_GROW_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThicknessConfig {
    /// Isosurface level λ.
    pub lambda: f64,
    /// Half-width multiplier of the proposal interval J.
    pub k: f64,
    pub samples_per_interval: usize,
    pub bisection_iters: usize,
    /// Fraction of the mean incident edge length used when no level set is found.
    pub fallback_shift: f64,
}

impl Default for ThicknessConfig {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
            samples_per_interval: 64,
            bisection_iters: 20,
            fallback_shift: 0.05,
        }
    }
}

impl ThicknessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return Err(Error::InvalidConfig(format!("lambda {} not in (0, 1)", self.lambda)));
        }
        if !(self.k >= 1.0) {
            return Err(Error::InvalidConfig(format!("k {} < 1", self.k)));
        }
        if self.samples_per_interval < 8 {
            return Err(Error::InvalidConfig(format!(
                "samples_per_interval {} < 8",
                self.samples_per_interval
            )));
        }
        if !(self.fallback_shift >= 0.0) {
            return Err(Error::InvalidConfig("fallback_shift must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexShiftRecord {
    pub sigma: f64,
    pub interval_i: (f64, f64),
    pub eps_in: f64,
    pub eps_out: f64,
    pub eps_mid: f64,
    pub eps_half: f64,
    pub interval_j: (f64, f64),
    pub delta_in: f64,
    pub delta_out: f64,
    /// The regularized level set was empty inside I.
    pub proposal_fallback: bool,
    /// The unconstrained level set was empty inside J.
    pub shift_fallback: bool,
}

impl VertexShiftRecord {
    /// Record with only the final shifts set (used by tests and growth).
    pub fn from_shifts(delta_in: f64, delta_out: f64) -> Self {
        Self {
            sigma: 0.0,
            interval_i: (0.0, 0.0),
            eps_in: 0.0,
            eps_out: 0.0,
            eps_mid: 0.0,
            eps_half: 0.0,
            interval_j: (delta_in.min(0.0), delta_out.max(0.0)),
            delta_in,
            delta_out,
            proposal_fallback: false,
            shift_fallback: false,
        }
    }
}

/// Super-level set {t ∈ search | d(v + t n) ≥ λ}: returns (inf, sup), or `None`
/// when no sample reaches λ. Endpoints are bracketed on a uniform grid of
/// `samples` points and refined by `iters` bisection steps.
pub fn isosurface_interval_with<F: Fn(&Vec3) -> f64>(
    density: F,
    v: &Vec3,
    n: &Vec3,
    search: (f64, f64),
    lambda: f64,
    samples: usize,
    iters: usize,
) -> Option<(f64, f64)> {
    let (a, b) = search;
    let eval = |t: f64| density(&(v + n * t));
    if !(b > a) {
        return (eval(a) >= lambda).then_some((a, a));
    }
    let samples = samples.max(2);
    let ts: Vec<f64> = (0..samples)
        .map(|j| {
            if j + 1 == samples {
                b
            } else {
                a + (b - a) * j as f64 / (samples - 1) as f64
            }
        })
        .collect();
    let above: Vec<bool> = ts.iter().map(|&t| eval(t) >= lambda).collect();
    let first = above.iter().position(|&x| x)?;
    let last = above.iter().rposition(|&x| x)?;

    let t_min = if first == 0 {
        a
    } else {
        let (mut lo, mut hi) = (ts[first - 1], ts[first]);
        for _ in 0..iters {
            let mid = 0.5 * (lo + hi);
            if eval(mid) >= lambda {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };
    let t_max = if last + 1 == samples {
        b
    } else {
        let (mut lo, mut hi) = (ts[last], ts[last + 1]);
        for _ in 0..iters {
            let mid = 0.5 * (lo + hi);
            if eval(mid) >= lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    Some((t_min, t_max))
}

/// [`isosurface_interval_with`] on the density of a whole cloud.
pub fn isosurface_interval(
    cloud: &GaussianCloud,
    v: &Vec3,
    n: &Vec3,
    search: (f64, f64),
    lambda: f64,
    cfg: &ThicknessConfig,
) -> Option<(f64, f64)> {
    let field = DensityField::new(cloud);
    isosurface_interval_with(
        |p| field.density(p),
        v,
        n,
        search,
        lambda,
        cfg.samples_per_interval,
        cfg.bisection_iters,
    )
}

/// Prebuilt acceleration structures for repeated shift queries.
pub struct ShiftEstimator {
    reg_tree: KdTree,
    reg_cov: Vec<Mat3>,
    reg_field: DensityField,
    unc_field: DensityField,
    cfg: ThicknessConfig,
}

impl ShiftEstimator {
    pub fn new(unconstrained: &GaussianCloud, regularized: &GaussianCloud, cfg: ThicknessConfig) -> Result<Self> {
        cfg.validate()?;
        if unconstrained.is_empty() || regularized.is_empty() {
            return Err(Error::TooFewGaussians {
                needed: 1,
                got: 0,
            });
        }
        let reg_cov = regularized
            .gaussians
            .iter()
            .map(|g| g.covariance())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            reg_tree: KdTree::new(&regularized.means()),
            reg_cov,
            reg_field: DensityField::new(regularized),
            unc_field: DensityField::new(unconstrained),
            cfg,
        })
    }

    /// sqrt(nᵀ Σ n) for the regularized Gaussian whose mean is closest to `v`.
    pub fn normal_std(&self, v: &Vec3, n: &Vec3) -> f64 {
        let (idx, _) = self
            .reg_tree
            .nearest(&[v.x, v.y, v.z], None)
            .expect("non-empty cloud");
        n.dot(&(self.reg_cov[idx] * n)).max(0.0).sqrt()
    }

    fn interval(&self, field: &DensityField, v: &Vec3, n: &Vec3, search: (f64, f64)) -> Option<(f64, f64)> {
        isosurface_interval_with(
            |p| field.density(p),
            v,
            n,
            search,
            self.cfg.lambda,
            self.cfg.samples_per_interval,
            self.cfg.bisection_iters,
        )
    }

    pub fn vertex_shift(&self, v: &Vec3, n: &Vec3, mean_edge: f64) -> VertexShiftRecord {
        let cfg = &self.cfg;
        let sigma = self.normal_std(v, n);
        let interval_i = (-3.0 * sigma, 3.0 * sigma);

        let (eps_in, eps_out, eps_mid, eps_half, interval_j, proposal_fallback) =
            match self.interval(&self.reg_field, v, n, interval_i) {
                Some((lo, hi)) => {
                    let mid = 0.5 * (lo + hi);
                    let half = 0.5 * (hi - lo);
                    (lo, hi, mid, half, (mid - cfg.k * half, mid + cfg.k * half), false)
                }
                None => {
                    let w = cfg.k * cfg.fallback_shift * sigma;
                    (0.0, 0.0, 0.0, 0.0, (-w, w), true)
                }
            };

        let (delta_in, delta_out, shift_fallback) = match self.interval(&self.unc_field, v, n, interval_j) {
            Some((lo, hi)) => (lo, hi, false),
            None => {
                let s = cfg.fallback_shift * mean_edge;
                (
                    (-s).clamp(interval_j.0, interval_j.1),
                    s.clamp(interval_j.0, interval_j.1),
                    true,
                )
            }
        };

        VertexShiftRecord {
            sigma,
            interval_i,
            eps_in,
            eps_out,
            eps_mid,
            eps_half,
            interval_j,
            delta_in,
            delta_out,
            proposal_fallback,
            shift_fallback,
        }
    }
}

/// σ of the closest regularized Gaussian along `n`.
pub fn normal_std(regularized: &GaussianCloud, v: &Vec3, n: &Vec3) -> Result<f64> {
    let tree = KdTree::new(&regularized.means());
    let (idx, _) = tree
        .nearest(&[v.x, v.y, v.z], None)
        .ok_or(Error::TooFewGaussians { needed: 1, got: 0 })?;
    let cov = regularized.gaussians[idx].covariance()?;
    Ok(n.dot(&(cov * n)).max(0.0).sqrt())
}

pub fn compute_vertex_shift(
    unconstrained: &GaussianCloud,
    regularized: &GaussianCloud,
    v: &Vec3,
    n: &Vec3,
    mean_edge: f64,
    cfg: &ThicknessConfig,
) -> Result<VertexShiftRecord> {
    Ok(ShiftEstimator::new(unconstrained, regularized, *cfg)?.vertex_shift(v, n, mean_edge))
}

/// One record per mesh vertex, in vertex order.
pub fn compute_shifts(
    unconstrained: &GaussianCloud,
    regularized: &GaussianCloud,
    mesh: &TriMesh,
    cfg: &ThicknessConfig,
) -> Result<Vec<VertexShiftRecord>> {
    let estimator = ShiftEstimator::new(unconstrained, regularized, *cfg)?;
    let edges = mesh.mean_incident_edge_lengths();
    let records: Vec<VertexShiftRecord> = (0..mesh.vertices.len())
        .into_par_iter()
        .map(|i| estimator.vertex_shift(&mesh.vertices[i], &mesh.normals[i], edges[i]))
        .collect();
    let proposal = records.iter().filter(|r| r.proposal_fallback).count();
    let shift = records.iter().filter(|r| r.shift_fallback).count();
    info!(
        "thickness: {} vertices, {} with empty regularized level set, {} with empty unconstrained level set",
        records.len(),
        proposal,
        shift
    );
    Ok(records)
}

/// Uniform hash over cell bounding boxes.
pub(crate) struct CellHash {
    size: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

impl CellHash {
    pub(crate) fn new(cells: &[PrismaticCell]) -> Self {
        let mut diam: Vec<f64> = cells.iter().map(|c| c.diameter()).filter(|d| *d > 0.0).collect();
        let size = if diam.is_empty() {
            1.0
        } else {
            let mid = diam.len() / 2;
            *diam.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (ci, cell) in cells.iter().enumerate() {
            let (lo, hi) = cell.bounds();
            let lo = key(&lo, size);
            let hi = key(&hi, size);
            for x in lo[0]..=hi[0] {
                for y in lo[1]..=hi[1] {
                    for z in lo[2]..=hi[2] {
                        buckets.entry([x, y, z]).or_default().push(ci as u32);
                    }
                }
            }
        }
        Self { size, buckets }
    }

    pub(crate) fn candidates(&self, p: &Vec3) -> &[u32] {
        self.buckets.get(&key(p, self.size)).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn key(p: &Vec3, size: f64) -> [i64; 3] {
    [
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    ]
}

/// Returns the first non-incident cell (face index) that strictly contains `p`.
pub(crate) fn foreign_cell_containing(
    mesh: &TriMesh,
    cells: &[PrismaticCell],
    hash: &CellHash,
    vertex: usize,
    p: &Vec3,
) -> Option<usize> {
    hash.candidates(p).iter().map(|&c| c as usize).find(|&c| {
        !mesh.faces[c].contains(&(vertex as u32)) && matches!(cells[c].contains(p), Ok(true))
    })
}

/// Grows the shifts from zero to their targets in `steps` increments, freezing a
/// vertex side as soon as its bound vertex would enter a foreign cell.
pub fn grow_shifts(mesh: &TriMesh, targets: &[VertexShiftRecord], steps: usize) -> Result<Vec<VertexShiftRecord>> {
    let n = mesh.vertices.len();
    if targets.len() != n {
        return Err(Error::ShiftLengthMismatch {
            shifts: targets.len(),
            vertices: n,
        });
    }
    if steps == 0 {
        return Err(Error::InvalidConfig("grow steps must be >= 1".into()));
    }
    // Side 0 = inner, 1 = outer.
    let mut current = vec![[0.0f64; 2]; n];
    let mut frozen = vec![[false; 2]; n];
    let target = |i: usize, s: usize| if s == 0 { targets[i].delta_in } else { targets[i].delta_out };

    for step in 1..=steps {
        let frac = step as f64 / steps as f64;
        let mut grown = vec![[false; 2]; n];
        let mut proposal = current.clone();
        for i in 0..n {
            for s in 0..2 {
                if !frozen[i][s] {
                    proposal[i][s] = if step == steps { target(i, s) } else { target(i, s) * frac };
                    grown[i][s] = proposal[i][s] != current[i][s];
                }
            }
        }
        // Revert offending sides until the configuration is intersection-free.
        loop {
            let layer = FrostingLayer::from_deltas(
                mesh,
                proposal.iter().map(|d| d[0]).collect(),
                proposal.iter().map(|d| d[1]).collect(),
            )?;
            let hash = CellHash::new(&layer.cells);
            let hits: Vec<(usize, usize, usize)> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let layer = &layer;
                    let hash = &hash;
                    let proposal = &proposal;
                    (0..2).filter_map(move |s| {
                        let p = mesh.vertices[i] + proposal[i][s] * mesh.normals[i];
                        foreign_cell_containing(mesh, &layer.cells, hash, i, &p).map(|c| (i, s, c))
                    })
                })
                .collect();
            if hits.is_empty() {
                break;
            }
            let mut reverted = false;
            for (i, s, c) in hits {
                if grown[i][s] {
                    proposal[i][s] = current[i][s];
                    grown[i][s] = false;
                    frozen[i][s] = true;
                    reverted = true;
                } else {
                    for &vi in &mesh.faces[c] {
                        let vi = vi as usize;
                        for side in 0..2 {
                            if grown[vi][side] {
                                proposal[vi][side] = current[vi][side];
                                grown[vi][side] = false;
                                frozen[vi][side] = true;
                                reverted = true;
                            }
                        }
                    }
                }
            }
            if !reverted {
                // Nothing left to revert: the intersection predates this step.
                break;
            }
        }
        current = proposal;
    }

    Ok(targets
        .iter()
        .zip(&current)
        .map(|(t, d)| VertexShiftRecord {
            delta_in: d[0],
            delta_out: d[1],
            ..*t
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{CloudRole, Gaussian3D};

    fn cloud(gs: Vec<Gaussian3D>, role: CloudRole) -> GaussianCloud {
        GaussianCloud::new(gs, 0, role).unwrap()
    }

    fn opaque(mean: Vec3, log_scales: Vec3) -> Gaussian3D {
        let mut g = Gaussian3D::isotropic(mean, 1.0, 0.5);
        g.log_scales = log_scales;
        g.opacity_logit = 80.0;
        g
    }

    const CROSSING: f64 = 3.034_854_258_770_293; // sqrt(2 ln 100)

    #[test]
    fn normal_std_examples() {
        let iso = cloud(vec![Gaussian3D::isotropic(Vec3::new(5.0, 1.0, 0.0), 2.0, 0.5)], CloudRole::Regularized);
        assert!((normal_std(&iso, &Vec3::zeros(), &Vec3::y()).unwrap() - 2.0).abs() < 1e-12);
        let aniso = cloud(
            vec![opaque(Vec3::zeros(), Vec3::new(3f64.ln(), 0.0, 0.0))],
            CloudRole::Regularized,
        );
        assert!((normal_std(&aniso, &Vec3::zeros(), &Vec3::x()).unwrap() - 3.0).abs() < 1e-12);
        let diag = Vec3::new(1.0, 1.0, 0.0).normalize();
        assert!((normal_std(&aniso, &Vec3::zeros(), &diag).unwrap() - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn interval_of_a_single_gaussian() {
        let c = cloud(vec![opaque(Vec3::zeros(), Vec3::zeros())], CloudRole::Unconstrained);
        let cfg = ThicknessConfig::default();
        let full = isosurface_interval(&c, &Vec3::zeros(), &Vec3::z(), (-3.0, 3.0), 0.01, &cfg).unwrap();
        assert_eq!(full, (-3.0, 3.0));
        let (lo, hi) = isosurface_interval(&c, &Vec3::zeros(), &Vec3::z(), (-9.0, 9.0), 0.01, &cfg).unwrap();
        assert!((lo + CROSSING).abs() < 1e-3 && (hi - CROSSING).abs() < 1e-3);
        let half = cloud(vec![Gaussian3D::isotropic(Vec3::zeros(), 1.0, 0.5)], CloudRole::Unconstrained);
        assert!(isosurface_interval_with(
            |p| crate::scene::density_at(&half, p),
            &Vec3::zeros(),
            &Vec3::z(),
            (-3.0, 3.0),
            1.0,
            64,
            20
        )
        .is_none());
    }

    #[test]
    fn single_gaussian_vertex_shift() {
        let c = cloud(vec![opaque(Vec3::zeros(), Vec3::zeros())], CloudRole::Unconstrained);
        let r = compute_vertex_shift(&c, &c, &Vec3::zeros(), &Vec3::z(), 1.0, &ThicknessConfig::default()).unwrap();
        assert!((r.sigma - 1.0).abs() < 1e-12);
        assert_eq!(r.interval_i, (-3.0, 3.0));
        assert_eq!((r.eps_in, r.eps_out), (-3.0, 3.0));
        assert_eq!(r.interval_j, (-9.0, 9.0));
        assert!((r.delta_in + CROSSING).abs() < 1e-3);
        assert!((r.delta_out - CROSSING).abs() < 1e-3);
    }

    #[test]
    fn flat_gaussian_gives_a_thin_layer() {
        let flat = opaque(Vec3::zeros(), Vec3::new(0.0, 0.0, 0.01f64.ln()));
        let c = cloud(vec![flat], CloudRole::Regularized);
        let r = compute_vertex_shift(&c, &c, &Vec3::zeros(), &Vec3::z(), 1.0, &ThicknessConfig::default()).unwrap();
        assert!((r.sigma - 0.01).abs() < 1e-12);
        assert!((r.delta_out - 0.01 * CROSSING).abs() < 1e-3);
        assert!((r.delta_in + 0.01 * CROSSING).abs() < 1e-3);
    }

    #[test]
    fn empty_unconstrained_level_set_falls_back() {
        let reg = cloud(vec![opaque(Vec3::zeros(), Vec3::zeros())], CloudRole::Regularized);
        // The only unconstrained Gaussian sits far away along x.
        let unc = cloud(vec![opaque(Vec3::new(100.0, 0.0, 0.0), Vec3::zeros())], CloudRole::Unconstrained);
        let cfg = ThicknessConfig::default();
        let r = compute_vertex_shift(&unc, &reg, &Vec3::zeros(), &Vec3::z(), 2.0, &cfg).unwrap();
        assert!(r.shift_fallback && !r.proposal_fallback);
        assert_eq!(r.delta_in, -0.1);
        assert_eq!(r.delta_out, 0.1);
    }

    #[test]
    fn empty_regularized_level_set_falls_back() {
        let mut faint = Gaussian3D::isotropic(Vec3::zeros(), 1.0, 0.005);
        faint.sh = vec![0.0; 3];
        let reg = cloud(vec![faint], CloudRole::Regularized);
        let unc = cloud(vec![opaque(Vec3::zeros(), Vec3::zeros())], CloudRole::Unconstrained);
        let r = compute_vertex_shift(&unc, &reg, &Vec3::zeros(), &Vec3::z(), 1.0, &ThicknessConfig::default()).unwrap();
        assert!(r.proposal_fallback);
        assert_eq!((r.eps_in, r.eps_out), (0.0, 0.0));
        let w = 3.0 * 0.05 * 1.0;
        assert_eq!(r.interval_j, (-w, w));
        assert_eq!((r.delta_in, r.delta_out), (-w, w));
    }

    #[test]
    fn invalid_config() {
        let mut cfg = ThicknessConfig::default();
        cfg.lambda = 1.5;
        assert!(cfg.validate().is_err());
        cfg = ThicknessConfig { samples_per_interval: 4, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    fn plane(n: usize) -> TriMesh {
        let mut v = Vec::new();
        for y in 0..=n {
            for x in 0..=n {
                v.push(Vec3::new(x as f64, y as f64, 0.0));
            }
        }
        let mut f = Vec::new();
        let w = (n + 1) as u32;
        for y in 0..n as u32 {
            for x in 0..n as u32 {
                let a = y * w + x;
                f.push([a, a + 1, a + w + 1]);
                f.push([a, a + w + 1, a + w]);
            }
        }
        TriMesh::new(v, f).unwrap()
    }

    #[test]
    fn growth_on_a_plane_reaches_targets() {
        let mesh = plane(4);
        let targets: Vec<_> = (0..mesh.vertices.len())
            .map(|_| VertexShiftRecord::from_shifts(-0.3, 0.4))
            .collect();
        for steps in [1, 3, 10] {
            let grown = grow_shifts(&mesh, &targets, steps).unwrap();
            assert_eq!(grown, targets);
        }
    }

    #[test]
    fn single_vertex_mesh_gives_one_record() {
        let mesh = TriMesh::with_normals(vec![Vec3::zeros()], vec![], vec![Vec3::z()]).unwrap();
        let c = cloud(vec![opaque(Vec3::zeros(), Vec3::zeros())], CloudRole::Unconstrained);
        let records = compute_shifts(&c, &c, &mesh, &ThicknessConfig::default()).unwrap();
        assert_eq!(records.len(), 1);
    }
}
