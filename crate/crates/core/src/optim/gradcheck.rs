//! Central finite-difference validation of the analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::backward::{loss_and_gradients, loss_only};
use super::params::{self, Group};
use crate::error::{Error, Result};
use crate::pipeline::FrostingScene;
use crate::render::{Camera, Image};
use crate::scene::sh;

/// Both values below this magnitude count as agreeing.
pub const ABS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub gaussian: usize,
    pub offset: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: Group,
    pub tolerance: f64,
    pub samples: Vec<Sample>,
    pub max_rel: f64,
    pub median_rel: f64,
    pub failures: Vec<Sample>,
}

impl GroupReport {
    pub fn passed(&self) -> usize {
        self.samples.len() - self.failures.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: Vec<GroupReport>,
}

impl GradCheckReport {
    pub fn group(&self, g: Group) -> Option<&GroupReport> {
        self.groups.iter().find(|r| r.group == g)
    }

    pub fn total(&self) -> usize {
        self.groups.iter().map(|g| g.samples.len()).sum()
    }

    pub fn passed(&self) -> usize {
        self.groups.iter().map(GroupReport::passed).sum()
    }
}

/// |a − n| / max(|a|, |n|), or 0 when both are below [`ABS_FLOOR`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    if denom <= ABS_FLOOR {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

pub fn default_tolerance(g: Group) -> f64 {
    match g {
        Group::Rotation => 1e-2,
        _ => 1e-3,
    }
}

/// Central difference of the loss along one parameter.
pub fn finite_difference(scene: &FrostingScene, cam: &Camera, gt: &Image, gaussian: usize, offset: usize, eps: f64) -> Result<f64> {
    let sh_len = sh::coeff_count(scene.sh_degree);
    let mut p = vec![0.0; params::stride(sh_len)];
    params::read(&scene.gaussians[gaussian], &mut p);
    let mut probe = scene.clone();
    let base = p[offset];
    p[offset] = base + eps;
    params::write(&mut probe.gaussians[gaussian], &p);
    let plus = loss_only(&probe, cam, gt)?;
    p[offset] = base - eps;
    params::write(&mut probe.gaussians[gaussian], &p);
    let minus = loss_only(&probe, cam, gt)?;
    Ok((plus - minus) / (2.0 * eps))
}

fn group_offsets(g: Group, sh_len: usize) -> std::ops::Range<usize> {
    match g {
        Group::Logits => params::LOGITS..params::SCALES,
        Group::Scales => params::SCALES..params::ROTATION,
        Group::Rotation => params::ROTATION..params::OPACITY,
        Group::Opacity => params::OPACITY..params::SH,
        Group::Sh => params::SH..params::SH + sh_len,
    }
}

/// Compares analytic and finite-difference gradients on `sample_count`
/// randomly drawn parameters per group.
pub fn gradient_check(
    scene: &FrostingScene,
    cam: &Camera,
    gt: &Image,
    eps: f64,
    sample_count: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if sample_count == 0 {
        return Err(Error::InvalidConfig("sample_count must be >= 1".into()));
    }
    if scene.gaussians.is_empty() {
        return Ok(GradCheckReport { groups: Vec::new() });
    }
    let (_, grads) = loss_and_gradients(scene, cam, gt)?;
    let sh_len = sh::coeff_count(scene.sh_degree);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut groups = Vec::new();
    for g in Group::ALL {
        let tol = default_tolerance(g);
        let range = group_offsets(g, sh_len);
        let mut samples = Vec::with_capacity(sample_count);
        for _ in 0..sample_count {
            let gaussian = rng.gen_range(0..scene.gaussians.len());
            let offset = rng.gen_range(range.clone());
            let analytic = grads.of(gaussian)[offset];
            let numeric = finite_difference(scene, cam, gt, gaussian, offset, eps)?;
            samples.push(Sample {
                gaussian,
                offset,
                analytic,
                numeric,
                rel_error: relative_error(analytic, numeric),
            });
        }
        let mut errs: Vec<f64> = samples.iter().map(|s| s.rel_error).collect();
        errs.sort_by(f64::total_cmp);
        let failures = samples.iter().filter(|s| s.rel_error > tol).cloned().collect();
        groups.push(GroupReport {
            group: g,
            tolerance: tol,
            max_rel: *errs.last().expect("sample_count >= 1"),
            median_rel: errs[errs.len() / 2],
            samples,
            failures,
        });
    }
    Ok(GradCheckReport { groups })
}
