//! Refinement of frosted Gaussians against posed images.

pub mod adam;
pub mod backward;
pub mod gradcheck;
pub mod params;

use log::{debug, info};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::{AdamState, LearningRates};
pub use backward::{loss_and_gradients, loss_only, Gradients};
pub use gradcheck::{gradient_check, GradCheckReport, GroupReport};
pub use params::Group;

use crate::error::{Error, Result};
use crate::pipeline::FrostingScene;
use crate::render::{Camera, Image};
use crate::scene::sh;

pub const DEFAULT_ITERATIONS: usize = 2_000;
pub const EMA_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub iterations: usize,
    pub learning_rates: LearningRates,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            iterations: DEFAULT_ITERATIONS,
            learning_rates: LearningRates::default(),
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let lr = &self.learning_rates;
        for g in Group::ALL {
            let v = lr.get(g);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("learning rate for {} is {v}", g.name())));
            }
        }
        Ok(())
    }
}

/// One posed training image.
#[derive(Debug, Clone, PartialEq)]
pub struct View {
    pub camera: Camera,
    pub image: Image,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeReport {
    pub steps: usize,
    pub losses: Vec<f64>,
    /// Exponential moving average of the loss after each step.
    pub ema: Vec<f64>,
}

impl OptimizeReport {
    pub fn initial_ema(&self) -> Option<f64> {
        self.ema.first().copied()
    }

    pub fn final_ema(&self) -> Option<f64> {
        self.ema.last().copied()
    }
}

fn first_non_finite_group(values: &[f64], stride: usize) -> Option<Group> {
    values
        .iter()
        .position(|v| !v.is_finite())
        .map(|i| Group::of_offset(i % stride))
}

/// Adam refinement with one camera per step, visiting the views in a seeded
/// permutation per epoch. The Gaussian count never changes.
pub fn optimize(
    scene: &FrostingScene,
    views: &[View],
    cfg: &OptimizerConfig,
    state: Option<AdamState>,
) -> Result<(FrostingScene, OptimizeReport, AdamState)> {
    cfg.validate()?;
    if views.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for v in views {
        if v.image.width != v.camera.width || v.image.height != v.camera.height {
            return Err(Error::InvalidConfig(format!(
                "image {}x{} does not match camera {}x{}",
                v.image.width, v.image.height, v.camera.width, v.camera.height
            )));
        }
    }
    let sh_len = sh::coeff_count(scene.sh_degree);
    let stride = params::stride(sh_len);
    let mut out = scene.clone();
    let mut flat = params::flatten(&out.gaussians, sh_len);
    let mut adam = match state {
        Some(s) if s.m.len() == flat.len() && s.v.len() == flat.len() => s,
        Some(s) => {
            return Err(Error::InvalidConfig(format!(
                "optimizer state has {} entries, scene needs {}",
                s.m.len(),
                flat.len()
            )))
        }
        None => AdamState::new(flat.len()),
    };
    let count = out.gaussians.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = Vec::new();
    let alpha = 2.0 / (EMA_WINDOW as f64 + 1.0);
    let mut report = OptimizeReport {
        steps: 0,
        losses: Vec::with_capacity(cfg.iterations),
        ema: Vec::with_capacity(cfg.iterations),
    };

    for step in 0..cfg.iterations {
        if order.is_empty() {
            order = (0..views.len()).collect();
            order.shuffle(&mut rng);
            order.reverse();
        }
        let view = &views[order.pop().expect("refilled above")];
        let (loss, grads) = loss_and_gradients(&out, &view.camera, &view.image)?;
        if !loss.is_finite() {
            let group = first_non_finite_group(&flat, stride).map_or("loss", Group::name);
            return Err(Error::NonFiniteLoss { group: group.into() });
        }
        if let Some(g) = first_non_finite_group(&grads.values, stride) {
            return Err(Error::NonFiniteLoss { group: g.name().into() });
        }
        adam.update(&mut flat, &grads.values, stride, &cfg.learning_rates);
        if let Some(g) = first_non_finite_group(&flat, stride) {
            return Err(Error::NonFiniteLoss { group: g.name().into() });
        }
        params::unflatten(&mut out.gaussians, &flat, sh_len);

        let ema = match report.ema.last() {
            Some(prev) => alpha * loss + (1.0 - alpha) * prev,
            None => loss,
        };
        report.losses.push(loss);
        report.ema.push(ema);
        report.steps += 1;
        if step % 100 == 0 {
            debug!("step {step}: loss {loss:.6} ema {ema:.6}");
        }
    }
    if out.gaussians.len() != count {
        return Err(Error::Internal("gaussian count changed during optimization".into()));
    }
    if let (Some(a), Some(b)) = (report.initial_ema(), report.final_ema()) {
        info!("optimized {} steps: ema loss {a:.6} -> {b:.6}", report.steps);
    }
    Ok((out, report, adam))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toy;

    fn small() -> (FrostingScene, Vec<View>) {
        let t = toy::toy_scene(&toy::ToyConfig {
            budget: 150,
            cameras: 4,
            width: 24,
            height: 24,
            ..Default::default()
        })
        .unwrap();
        let views = t
            .cameras
            .iter()
            .map(|c| View {
                camera: c.clone(),
                image: t.scene.render(c).unwrap(),
            })
            .collect();
        (t.scene, views)
    }

    #[test]
    fn zero_iterations_and_zero_rates_leave_scene_unchanged() {
        let (scene, views) = small();
        let cfg = OptimizerConfig {
            iterations: 0,
            ..Default::default()
        };
        let (out, report, _) = optimize(&scene, &views, &cfg, None).unwrap();
        assert_eq!(out, scene);
        assert_eq!(report.steps, 0);

        let mut perturbed = scene.clone();
        toy::randomize_appearance(&mut perturbed, 3);
        let cfg = OptimizerConfig {
            iterations: 6,
            learning_rates: LearningRates::uniform(0.0),
            seed: 1,
        };
        let (out, _, _) = optimize(&perturbed, &views, &cfg, None).unwrap();
        assert_eq!(out, perturbed);
    }

    #[test]
    fn perfect_fit_has_zero_gradient() {
        let (scene, views) = small();
        let (loss, grads) = loss_and_gradients(&scene, &views[0].camera, &views[0].image).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.values.iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn loss_decreases_and_count_is_constant() {
        let (scene, views) = small();
        let mut start = scene.clone();
        toy::randomize_appearance(&mut start, 9);
        let cfg = OptimizerConfig {
            iterations: 60,
            seed: 2,
            ..Default::default()
        };
        let (out, report, state) = optimize(&start, &views, &cfg, None).unwrap();
        assert_eq!(out.gaussians.len(), start.gaussians.len());
        assert!(report.final_ema().unwrap() <= report.initial_ema().unwrap());
        assert_eq!(state.step, 60);
        for g in &out.gaussians {
            let cell = out.layer.cell(g.cell as usize).unwrap();
            assert!(cell.contains(&g.position(&out.layer).unwrap()).unwrap());
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let (scene, views) = small();
        let mut start = scene.clone();
        toy::randomize_appearance(&mut start, 4);
        let cfg = OptimizerConfig {
            iterations: 10,
            seed: 5,
            ..Default::default()
        };
        let a = optimize(&start, &views, &cfg, None).unwrap().0;
        let b = optimize(&start, &views, &cfg, None).unwrap().0;
        assert_eq!(a, b);
    }
}
