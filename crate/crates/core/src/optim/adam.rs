//! Adaptive moment estimation with per-group learning rates.

use super::params::Group;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRates {
    pub logits: f64,
    pub scales: f64,
    pub rotation: f64,
    pub opacity: f64,
    pub sh: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self {
            logits: 2e-3,
            scales: 5e-3,
            rotation: 1e-3,
            opacity: 5e-2,
            sh: 2.5e-3,
        }
    }
}

impl LearningRates {
    pub fn uniform(lr: f64) -> Self {
        Self {
            logits: lr,
            scales: lr,
            rotation: lr,
            opacity: lr,
            sh: lr,
        }
    }

    pub fn get(&self, g: Group) -> f64 {
        match g {
            Group::Logits => self.logits,
            Group::Scales => self.scales,
            Group::Rotation => self.rotation,
            Group::Opacity => self.opacity,
            Group::Sh => self.sh,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    /// One bias-corrected update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], stride: usize, lr: &LearningRates) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let bc1 = 1.0 - BETA1.powi(self.step as i32);
        let bc2 = 1.0 - BETA2.powi(self.step as i32);
        let rates: Vec<f64> = (0..stride).map(|o| lr.get(Group::of_offset(o))).collect();
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = BETA1 * self.m[i] + (1.0 - BETA1) * g;
            self.v[i] = BETA2 * self.v[i] + (1.0 - BETA2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= rates[i % stride] * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
}
