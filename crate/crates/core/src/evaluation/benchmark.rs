use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::samplers::{advance, par_chunks, ChainState, SamplerConfig, SamplerKind, StepSchedule};
use crate::targets::{kl_gaussians, GaussianDist, GaussianJointBenchmark};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KlCurve {
    pub sampler: SamplerKind,
    pub chains: usize,
    pub steps: usize,
    pub schedule: StepSchedule,
    /// `(iteration, KL(empirical ‖ target))`, iterations strictly increasing.
    pub points: Vec<(usize, f64)>,
}

impl KlCurve {
    pub fn initial(&self) -> f64 {
        self.points[0].1
    }

    pub fn final_kl(&self) -> f64 {
        self.points[self.points.len() - 1].1
    }
}

/// `0`, then about `count` log-spaced iterations up to and including `total`.
pub fn log_checkpoints(total: usize, count: usize) -> Vec<usize> {
    let mut out = vec![0];
    if total == 0 {
        return out;
    }
    let count = count.max(1);
    for i in 0..count {
        let frac = if count == 1 { 1.0 } else { i as f64 / (count - 1) as f64 };
        let t = ((total as f64).powf(frac)).round() as usize;
        if t > *out.last().unwrap() {
            out.push(t);
        }
    }
    if *out.last().unwrap() != total {
        out.push(total);
    }
    out
}

/// Run `chains` chains of `cfg.kind` on the benchmark target from ancestral
/// draws of `q(x, h)`, fitting a Gaussian to the chain states at each
/// checkpoint. Chain `i` uses stream `(seed, BENCH, i)`, so every sampler
/// starts from the same proposals for a given seed. CoopNet advances in
/// whole calls, so its recorded iterations are multiples of `coop_lx`.
pub fn sampler_benchmark(
    bench: &GaussianJointBenchmark,
    cfg: &SamplerConfig,
    chains: usize,
    checkpoints: &[usize],
    seed: u64,
) -> Result<KlCurve> {
    cfg.validate()?;
    let dim = 2 * bench.dim();
    if chains < dim + 1 {
        return Err(Error::invalid(format!("{chains} chains cannot fit a {dim}-dimensional covariance")));
    }
    if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("checkpoints must be non-empty and strictly increasing"));
    }
    let parts = par_chunks(chains, |range| {
        let mut rngs: Vec<_> = range.map(|i| rng::stream(seed, domain::BENCH, i as u64)).collect();
        let mut state = ChainState::from_ancestral(bench, &mut rngs)?;
        let mut snaps = Vec::with_capacity(checkpoints.len());
        for &cp in checkpoints {
            if cp > state.t {
                let todo = cp - state.t;
                advance(cfg, bench, &mut state, &mut rngs, todo)?;
            }
            snaps.push((state.t, state.joint()));
        }
        Ok(snaps)
    })?;
    let mut points: Vec<(usize, f64)> = Vec::with_capacity(checkpoints.len());
    for k in 0..checkpoints.len() {
        let t = parts[0][k].0;
        if points.last().is_some_and(|p| p.0 == t) {
            continue;
        }
        let z = Tensor::vstack(&parts.iter().map(|p| p[k].1.clone()).collect::<Vec<_>>())?;
        points.push((t, kl_gaussians(&GaussianDist::empirical(&z)?, &bench.pi)?));
    }
    Ok(KlCurve { sampler: cfg.kind, chains, steps: *checkpoints.last().unwrap(), schedule: cfg.schedule, points })
}
