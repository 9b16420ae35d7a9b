use serde::{Deserialize, Serialize};

use super::adam::AdamConfig;
use super::update::Alphas;
use crate::error::{Error, Result};
use crate::samplers::SamplerConfig;

fn default_beta1() -> f64 {
    0.5
}
fn default_beta2() -> f64 {
    0.9
}
fn default_eps() -> f64 {
    1e-8
}
fn default_metric_every() -> usize {
    200
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    /// Labeled examples per minibatch; all of them when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled_batch_size: Option<usize>,
    pub lr_potential: f64,
    pub lr_generator: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub alpha_d: f64,
    #[serde(default)]
    pub alpha_c: f64,
    #[serde(default)]
    pub alpha_p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_metric_every")]
    pub metric_every: usize,
    /// Extra checkpoints every this many iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
}

impl TrainConfig {
    /// Mixture-toy defaults: batch 100, Adam(0.5, 0.9), lr 1e-3, SGLD with
    /// `L = 10`, `δ = 0.01`.
    pub fn gmm_default(iterations: usize) -> Self {
        Self {
            iterations,
            batch_size: 100,
            labeled_batch_size: None,
            lr_potential: 1e-3,
            lr_generator: 1e-3,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            sampler: SamplerConfig::sgld(10, 0.01),
            alpha_d: 0.0,
            alpha_c: 0.0,
            alpha_p: 0.0,
            seed: 0,
            metric_every: default_metric_every(),
            checkpoint_every: None,
        }
    }

    pub fn potential_adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr_potential, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    pub fn generator_adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr_generator, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    pub fn alphas(&self) -> Alphas {
        Alphas { d: self.alpha_d, c: self.alpha_c, p: self.alpha_p }
    }

    pub fn validate(&self) -> Result<()> {
        self.potential_adam().validate()?;
        self.generator_adam().validate()?;
        self.sampler.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.labeled_batch_size == Some(0) {
            return Err(Error::Config("labeled_batch_size must be positive".into()));
        }
        if [self.alpha_d, self.alpha_c, self.alpha_p].iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::Config("regularizer weights must be non-negative".into()));
        }
        if self.metric_every == 0 || self.checkpoint_every == Some(0) {
            return Err(Error::Config("metric_every and checkpoint_every must be positive".into()));
        }
        Ok(())
    }
}
