use serde::{Deserialize, Serialize};

use crate::autodiff::ParamSet;
use crate::error::{Error, Result};

fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.9
}
fn default_eps() -> f64 {
    1e-8
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: default_beta1(), beta2: default_beta2(), eps: default_eps() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config("adam eps must be positive".into()));
        }
        Ok(())
    }
}

/// First and second moments for the parameters that receive gradients.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AdamState {
    m: ParamSet,
    v: ParamSet,
    t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Bias-corrected Adam step descending on `grads`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, cfg: &AdamConfig) -> Result<()> {
        for (name, g) in grads.iter() {
            let p = params.require(name)?;
            if p.shape() != g.shape() {
                return Err(Error::ShapeMismatch {
                    context: "adam gradient",
                    expected: p.shape().to_vec(),
                    actual: g.shape().to_vec(),
                });
            }
            g.ensure_finite(name)?;
        }
        if self.m.is_empty() {
            self.m = grads.zeros_like();
            self.v = grads.zeros_like();
        }
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t as i32);
        let c2 = 1.0 - cfg.beta2.powi(self.t as i32);
        for (name, g) in grads.iter() {
            let m = self.m.require_mut(name)?.data_mut();
            for (mi, gi) in m.iter_mut().zip(g.data()) {
                *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            }
            let v = self.v.require_mut(name)?.data_mut();
            for (vi, gi) in v.iter_mut().zip(g.data()) {
                *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            }
            let (m, v) = (self.m.require(name)?.data(), self.v.require(name)?.data());
            for ((p, mi), vi) in params.require_mut(name)?.data_mut().iter_mut().zip(m).zip(v) {
                *p -= cfg.lr * (mi / c1) / ((vi / c2).sqrt() + cfg.eps);
            }
        }
        Ok(())
    }
}

pub fn adam_step(state: &mut AdamState, params: &mut ParamSet, grads: &ParamSet, cfg: &AdamConfig) -> Result<()> {
    state.step(params, grads, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn scalar(v: f64) -> ParamSet {
        [("w".to_string(), Tensor::vector(vec![v]))].into_iter().collect()
    }

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamConfig::new(0.001);
        let mut p = scalar(0.0);
        let mut s = AdamState::new();
        s.step(&mut p, &scalar(1.0), &cfg).unwrap();
        let want = -0.001 / (1.0 + 1e-8);
        assert!((p.get("w").unwrap().data()[0] - want).abs() < 1e-18);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = AdamConfig::new(0.1);
        let mut p = scalar(2.5);
        let mut s = AdamState::new();
        for _ in 0..10 {
            s.step(&mut p, &scalar(0.0), &cfg).unwrap();
        }
        assert_eq!(p.get("w").unwrap().data()[0], 2.5);
        assert_eq!(s.steps(), 10);
    }

    #[test]
    fn matches_reference_recursion() {
        let cfg = AdamConfig { lr: 0.01, beta1: 0.9, beta2: 0.999, eps: 1e-8 };
        let grads = [0.3, -1.2, 0.7, 0.05];
        let mut p = scalar(1.0);
        let mut s = AdamState::new();
        let (mut m, mut v, mut w) = (0.0f64, 0.0f64, 1.0f64);
        for (t, g) in grads.iter().enumerate() {
            s.step(&mut p, &scalar(*g), &cfg).unwrap();
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let k = t as i32 + 1;
            w -= 0.01 * (m / (1.0 - 0.9f64.powi(k))) / ((v / (1.0 - 0.999f64.powi(k))).sqrt() + 1e-8);
        }
        assert!((p.get("w").unwrap().data()[0] - w).abs() < 1e-15);
    }

    #[test]
    fn rejects_mismatch() {
        let mut p = scalar(0.0);
        let bad: ParamSet = [("w".to_string(), Tensor::vector(vec![1.0, 2.0]))].into_iter().collect();
        assert!(AdamState::new().step(&mut p, &bad, &AdamConfig::new(0.1)).is_err());
        let missing: ParamSet = [("q".to_string(), Tensor::vector(vec![1.0]))].into_iter().collect();
        assert!(AdamState::new().step(&mut p, &missing, &AdamConfig::new(0.1)).is_err());
    }
}
