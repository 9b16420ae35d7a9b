use std::ops::Range;

use rayon::prelude::*;

use super::config::SamplerConfig;
use super::revise::{revise, ChainState};
use super::target::{LatentTarget, NrfTarget};
use crate::error::{Error, Result};
use crate::models::{GeneratorNet, PotentialNet};
use crate::rng::ChainRng;
use crate::tensor::Tensor;

/// Chains per work unit. Fixed so that batching, and therefore every
/// floating-point result, is independent of the thread count.
pub const CHAIN_CHUNK: usize = 64;

/// Map `f` over fixed-size chunks of `0..n` in parallel, in order.
pub fn par_chunks<R, F>(n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(Range<usize>) -> Result<R> + Sync,
{
    let ranges: Vec<Range<usize>> = (0..n).step_by(CHAIN_CHUNK).map(|s| s..(s + CHAIN_CHUNK).min(n)).collect();
    ranges.into_par_iter().map(&f).collect()
}

/// How conditional chains pick their class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClassChoice {
    Unconditional,
    Fixed(usize),
    /// Argmax of the classifier at the ancestral proposal.
    Predicted,
}

/// Ancestral proposals for `n` chains, each revised by `cfg`. Chain `i`
/// draws all of its randomness from `rng_for(i)`.
pub fn sample_target<T, F>(target: &T, cfg: &SamplerConfig, n: usize, rng_for: F) -> Result<ChainState>
where
    T: LatentTarget + ?Sized,
    F: Fn(usize) -> ChainRng + Sync,
{
    sample_with_labels(target, cfg, n, &rng_for, &|_| Ok(None))
}

fn sample_with_labels<T: LatentTarget + ?Sized>(
    target: &T,
    cfg: &SamplerConfig,
    n: usize,
    rng_for: &(dyn Fn(usize) -> ChainRng + Sync),
    labels: &(dyn Fn(&Tensor) -> Result<Option<Vec<usize>>> + Sync),
) -> Result<ChainState> {
    if n == 0 {
        return Err(Error::EmptyInput("number of chains"));
    }
    cfg.validate()?;
    let parts = par_chunks(n, |range| {
        let mut rngs: Vec<ChainRng> = range.map(rng_for).collect();
        let mut state = ChainState::from_ancestral(target, &mut rngs)?;
        if let Some(l) = labels(&state.x)? {
            state = state.with_labels(l)?;
        }
        revise(cfg, target, &mut state, &mut rngs)?;
        Ok(state)
    })?;
    ChainState::concat(parts)
}

/// Sampling from `p_θ(x) q_φ(h | x)`: ancestral proposals revised with the
/// stochastic gradient.
pub fn sample_model<F>(pot: &PotentialNet, gen: &GeneratorNet, cfg: &SamplerConfig, n: usize, rng_for: F) -> Result<ChainState>
where
    F: Fn(usize) -> ChainRng + Sync,
{
    sample_target(&NrfTarget::new(pot, gen)?, cfg, n, rng_for)
}

/// Revision under a class-conditional potential `u_θ(x, y)`.
pub fn conditional_revise<F>(
    pot: &PotentialNet,
    gen: &GeneratorNet,
    class: ClassChoice,
    cfg: &SamplerConfig,
    n: usize,
    rng_for: F,
) -> Result<ChainState>
where
    F: Fn(usize) -> ChainRng + Sync,
{
    let target = NrfTarget::new(pot, gen)?;
    if class != ClassChoice::Unconditional && pot.num_outputs() < 2 {
        return Err(Error::invalid("conditional revision needs a potential with K >= 2"));
    }
    if let ClassChoice::Fixed(y) = class {
        if y >= pot.num_outputs() {
            return Err(Error::invalid(format!("class {y} out of range for K = {}", pot.num_outputs())));
        }
    }
    let labels = |x: &Tensor| -> Result<Option<Vec<usize>>> {
        Ok(match class {
            ClassChoice::Unconditional => None,
            ClassChoice::Fixed(y) => Some(vec![y; x.rows()]),
            ClassChoice::Predicted => Some(pot.predict(x)?),
        })
    };
    sample_with_labels(&target, cfg, n, &rng_for, &labels)
}

/// Noise-free decodes along the segment from `h1` to `h2`, `n ≥ 2` points.
pub fn interpolate_latent(gen: &GeneratorNet, h1: &[f64], h2: &[f64], n: usize) -> Result<Tensor> {
    if n < 2 {
        return Err(Error::invalid("interpolation needs at least 2 points"));
    }
    if h1.len() != gen.latent_dim() || h2.len() != gen.latent_dim() {
        return Err(Error::ShapeMismatch {
            context: "interpolation endpoints",
            expected: vec![gen.latent_dim()],
            actual: vec![h1.len(), h2.len()],
        });
    }
    let mut hs = Vec::with_capacity(n * h1.len());
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        hs.extend(h1.iter().zip(h2).map(|(a, b)| (1.0 - t) * a + t * b));
    }
    gen.decode(&Tensor::matrix(n, h1.len(), hs))
}
