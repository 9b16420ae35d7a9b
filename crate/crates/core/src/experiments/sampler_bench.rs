use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{log_checkpoints, sampler_benchmark, write_kl_curves, write_kl_summary, KlCurve};
use crate::rng::{self, domain};
use crate::samplers::{SamplerConfig, SamplerKind, StepSchedule};
use crate::targets::{benchmark_target, GaussianJointBenchmark};

fn default_dim() -> usize {
    10
}
fn default_scale() -> f64 {
    10.0
}
fn default_chains() -> usize {
    200
}
fn default_steps() -> usize {
    2000
}
fn default_checkpoints() -> usize {
    20
}
fn default_schedule() -> StepSchedule {
    StepSchedule::Decay { a: 10.0, b: 1000.0, c: 2.0 }
}
fn default_beta() -> f64 {
    0.1
}
fn default_coop() -> usize {
    20
}
fn default_samplers() -> Vec<SamplerKind> {
    SamplerKind::ALL.to_vec()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBenchConfig {
    /// Seeds the chains' starting proposals and noise.
    #[serde(default)]
    pub seed: u64,
    /// Seeds the random target, kept apart so seeds can be compared on one target.
    #[serde(default)]
    pub target_seed: u64,
    /// Dimension of `x` (and of `h`).
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// Covariance and mean scale of the random target.
    #[serde(default = "default_scale")]
    pub scale: f64,
    #[serde(default = "default_chains")]
    pub chains: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_schedule")]
    pub schedule: StepSchedule,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_coop")]
    pub coop_lx: usize,
    #[serde(default = "default_coop")]
    pub coop_lh: usize,
    #[serde(default = "default_samplers")]
    pub samplers: Vec<SamplerKind>,
}

impl Default for SamplerBenchConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            target_seed: 0,
            dim: default_dim(),
            scale: default_scale(),
            chains: default_chains(),
            steps: default_steps(),
            checkpoints: default_checkpoints(),
            schedule: default_schedule(),
            beta: default_beta(),
            coop_lx: default_coop(),
            coop_lh: default_coop(),
            samplers: default_samplers(),
        }
    }
}

impl SamplerBenchConfig {
    pub fn sampler(&self, kind: SamplerKind) -> SamplerConfig {
        let mut cfg = SamplerConfig::new(kind, self.steps, self.schedule);
        cfg.beta = self.beta;
        cfg.coop_lx = self.coop_lx;
        cfg.coop_lh = self.coop_lh;
        cfg
    }

    pub fn target(&self) -> Result<GaussianJointBenchmark> {
        benchmark_target(self.dim, self.scale, &mut rng::stream(self.target_seed, domain::TARGET, 0))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samplers.is_empty() {
            return Err(Error::Config("no samplers selected".into()));
        }
        if self.chains < 2 * self.dim + 1 {
            return Err(Error::Config(format!("need at least {} chains for dim {}", 2 * self.dim + 1, self.dim)));
        }
        self.samplers.iter().try_for_each(|&k| self.sampler(k).validate())
    }
}

/// One KL curve per selected sampler on a shared target and seed. With
/// `out`, writes `kl_curve.csv` and `kl_summary.csv`.
pub fn run_sampler_bench(cfg: &SamplerBenchConfig, out: Option<&Path>) -> Result<Vec<KlCurve>> {
    cfg.validate()?;
    let bench = cfg.target()?;
    let cps = log_checkpoints(cfg.steps, cfg.checkpoints);
    let curves = cfg
        .samplers
        .iter()
        .map(|&k| sampler_benchmark(&bench, &cfg.sampler(k), cfg.chains, &cps, cfg.seed))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out {
        write_kl_curves(&dir.join("kl_curve.csv"), &curves)?;
        write_kl_summary(&dir.join("kl_summary.csv"), &curves)?;
    }
    Ok(curves)
}
