use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nets::MlpConfig;
use crate::error::Result;
use crate::evaluation::{mode_coverage, write_coverage, ModeCoverageReport, REALISM_THRESHOLD};
use crate::models::{GeneratorNet, PotentialNet};
use crate::rng::{self, domain};
use crate::samplers::{sample_model, SamplerConfig};
use crate::targets::{gmm32, gmm_sample, write_points};
use crate::tensor::Tensor;
use crate::training::{train, DirSink, MemorySink, TrainConfig, TrainData, TrainSink, TrainSummary};

fn default_points() -> usize {
    1600
}
fn default_latent() -> usize {
    2
}
/// Generator noise for the mixture toy; σ = 1 blurs ancestral draws ten
/// times wider than the modes and training never settles.
fn default_sigma() -> f64 {
    0.3
}
fn default_reps() -> usize {
    100
}
fn default_per_rep() -> usize {
    100
}
fn default_dump() -> usize {
    1000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default = "default_per_rep")]
    pub samples_per_rep: usize,
    #[serde(default = "default_dump")]
    pub dump_samples: usize,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { reps: default_reps(), samples_per_rep: default_per_rep(), dump_samples: default_dump() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmUnsupConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_points")]
    pub data_points: usize,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    /// Generator observation noise.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub potential: MlpConfig,
    pub generator: MlpConfig,
    pub train: TrainConfig,
    /// Revision used for evaluation; the training sampler when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<SamplerConfig>,
    #[serde(default)]
    pub coverage: CoverageConfig,
}

impl GmmUnsupConfig {
    pub fn preset(iterations: usize) -> Self {
        Self {
            seed: 0,
            data_points: default_points(),
            latent_dim: default_latent(),
            sigma: default_sigma(),
            potential: MlpConfig::gmm_potential(),
            generator: MlpConfig::gmm_generator(),
            train: TrainConfig { alpha_p: 0.1, ..TrainConfig::gmm_default(iterations) },
            revision: None,
            coverage: CoverageConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GmmUnsupReport {
    pub generation: ModeCoverageReport,
    pub revision: ModeCoverageReport,
    pub train: TrainSummary,
}

/// Build nets from the config, seeded by `(seed, INIT, ·)`.
pub fn init_models(
    seed: u64,
    obs_dim: usize,
    num_outputs: usize,
    latent_dim: usize,
    sigma: f64,
    pot: &MlpConfig,
    gen: &MlpConfig,
) -> Result<(PotentialNet, GeneratorNet)> {
    let p = PotentialNet::init(pot.spec(obs_dim, num_outputs), &mut rng::stream(seed, domain::INIT, 0))?;
    let g = GeneratorNet::init(gen.spec(latent_dim, obs_dim), sigma, &mut rng::stream(seed, domain::INIT, 1))?;
    Ok((p, g))
}

/// Ancestral (`steps = 0`) or revised samples for evaluation stream `rep`.
pub fn eval_samples(
    pot: &PotentialNet,
    gen: &GeneratorNet,
    cfg: &SamplerConfig,
    n: usize,
    seed: u64,
    rep: u64,
) -> Result<Tensor> {
    Ok(sample_model(pot, gen, cfg, n, |i| rng::substream(seed, domain::EVAL, rep, i as u64))?.x)
}

/// Train on the 32-mode rings and score generation and revision samples.
/// With `out`, writes training artifacts, `coverage.csv` and `samples.csv`.
pub fn run_gmm_unsup(cfg: &GmmUnsupConfig, out: Option<&Path>) -> Result<GmmUnsupReport> {
    let spec = gmm32();
    let data = gmm_sample(&spec, cfg.data_points, &mut rng::stream(cfg.seed, domain::DATA, 0))?;
    let (mut pot, mut gen) = init_models(cfg.seed, 2, 1, cfg.latent_dim, cfg.sigma, &cfg.potential, &cfg.generator)?;
    let mut tcfg = cfg.train.clone();
    tcfg.seed = cfg.seed;
    let mut mem = MemorySink::default();
    let mut dir_sink;
    let sink: &mut dyn TrainSink = match out {
        Some(dir) => {
            dir_sink = DirSink::new(dir)?;
            &mut dir_sink
        }
        None => &mut mem,
    };
    let summary = train(&mut pot, &mut gen, &tcfg, &TrainData::unlabeled(data.points), sink)?;

    let revision = cfg.revision.clone().unwrap_or_else(|| tcfg.sampler.clone());
    let mut generation = revision.clone();
    generation.steps = 0;
    let c = &cfg.coverage;
    let modes = spec.means();
    let gen_report = mode_coverage(
        |r| eval_samples(&pot, &gen, &generation, c.samples_per_rep, cfg.seed, r as u64),
        modes,
        c.reps,
        REALISM_THRESHOLD,
    )?;
    let rev_report = mode_coverage(
        |r| eval_samples(&pot, &gen, &revision, c.samples_per_rep, cfg.seed, r as u64),
        modes,
        c.reps,
        REALISM_THRESHOLD,
    )?;
    if let Some(dir) = out {
        write_coverage(&dir.join("coverage.csv"), &[("generation", &gen_report), ("revision", &rev_report)])?;
        if c.dump_samples > 0 {
            let dump = u64::MAX;
            let g = eval_samples(&pot, &gen, &generation, c.dump_samples, cfg.seed, dump)?;
            let r = eval_samples(&pot, &gen, &revision, c.dump_samples, cfg.seed, dump)?;
            let kinds: Vec<usize> = (0..2 * c.dump_samples).map(|i| i / c.dump_samples).collect();
            write_points(&dir.join("samples.csv"), &Tensor::vstack(&[g, r])?, Some(&kinds))?;
        }
    }
    Ok(GmmUnsupReport { generation: gen_report, revision: rev_report, train: summary })
}
