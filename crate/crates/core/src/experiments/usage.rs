use std::path::Path;

use crate::error::Result;
use crate::models::{Checkpoint, GeneratorNet, PotentialNet};
use crate::rng::{self, domain};
use crate::samplers::{conditional_revise, interpolate_latent, sample_model, ClassChoice, SamplerConfig};
use crate::tensor::Tensor;

pub fn load_potential(path: &Path) -> Result<PotentialNet> {
    Checkpoint::load(path)?.into_potential()
}

pub fn load_generator(path: &Path) -> Result<GeneratorNet> {
    Checkpoint::load(path)?.into_generator()
}

/// `n` samples from a trained pair; `revise = false` keeps the ancestral
/// draws. Both modes share the chain streams, so the revised samples start
/// from exactly the unrevised ones.
pub fn generate(
    pot: &PotentialNet,
    gen: &GeneratorNet,
    cfg: &SamplerConfig,
    revise: bool,
    n: usize,
    seed: u64,
) -> Result<Tensor> {
    let mut cfg = cfg.clone();
    if !revise {
        cfg.steps = 0;
    }
    Ok(sample_model(pot, gen, &cfg, n, |i| rng::stream(seed, domain::EVAL, i as u64))?.x)
}

/// Class-conditioned revisions; returns the samples and the class used per row.
pub fn conditional(
    pot: &PotentialNet,
    gen: &GeneratorNet,
    class: ClassChoice,
    cfg: &SamplerConfig,
    n: usize,
    seed: u64,
) -> Result<(Tensor, Vec<usize>)> {
    let s = conditional_revise(pot, gen, class, cfg, n, |i| rng::stream(seed, domain::EVAL, i as u64))?;
    let labels = s.labels.clone().unwrap_or_default();
    Ok((s.x, labels))
}

/// Decoded straight-line path between two latent codes.
pub fn interpolate(gen: &GeneratorNet, h1: &[f64], h2: &[f64], n: usize) -> Result<Tensor> {
    interpolate_latent(gen, h1, h2, n)
}
