use super::config::{SamplerConfig, SamplerKind};
use super::target::LatentTarget;
use crate::error::{Error, Result};
use crate::rng::{self, ChainRng};
use crate::tensor::Tensor;

/// Chains beyond this magnitude are treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

/// A batch of chains `z = (x, h)` with momenta; one row per chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub x: Tensor,
    pub h: Tensor,
    pub v_x: Tensor,
    pub v_h: Tensor,
    /// Joint iterations taken so far; indexes the step schedule.
    pub t: usize,
    /// Per-chain class for conditional revision.
    pub labels: Option<Vec<usize>>,
    /// Chains reset to a fresh ancestral draw after diverging.
    pub resets: usize,
    /// Rows whose `h` is still an exact draw from `q(h | x)`.
    fresh: Vec<bool>,
}

impl ChainState {
    /// Chains at `(x, h)` with zero momenta. `h` is assumed to be an exact
    /// conditional draw, as after ancestral sampling.
    pub fn new(x: Tensor, h: Tensor) -> Result<Self> {
        if x.shape().len() != 2 || h.shape().len() != 2 || x.rows() != h.rows() {
            return Err(Error::ShapeMismatch {
                context: "chain state",
                expected: x.shape().to_vec(),
                actual: h.shape().to_vec(),
            });
        }
        x.ensure_finite("chain x")?;
        h.ensure_finite("chain h")?;
        let n = x.rows();
        Ok(Self {
            v_x: Tensor::zeros(x.shape()),
            v_h: Tensor::zeros(h.shape()),
            x,
            h,
            t: 0,
            labels: None,
            resets: 0,
            fresh: vec![true; n],
        })
    }

    pub fn from_ancestral<T: LatentTarget + ?Sized>(target: &T, rngs: &mut [ChainRng]) -> Result<Self> {
        let (x, h) = target.ancestral(rngs)?;
        Self::new(x, h)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.num_chains() {
            return Err(Error::invalid("one label per chain required"));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Forget that `h` is an exact conditional draw, so the next step
    /// refreshes `h*` by inner Langevin dynamics.
    pub fn mark_stale(&mut self) {
        self.fresh.iter_mut().for_each(|f| *f = false);
    }

    pub fn num_chains(&self) -> usize {
        self.x.rows()
    }

    /// Stack chunks row-wise; `t` is taken from the first.
    pub fn concat(parts: Vec<ChainState>) -> Result<Self> {
        let first = parts.first().ok_or(Error::EmptyInput("chain chunks"))?;
        let t = first.t;
        let labelled = first.labels.is_some();
        let cat = |f: fn(&ChainState) -> &Tensor| Tensor::vstack(&parts.iter().map(|p| f(p).clone()).collect::<Vec<_>>());
        Ok(Self {
            x: cat(|p| &p.x)?,
            h: cat(|p| &p.h)?,
            v_x: cat(|p| &p.v_x)?,
            v_h: cat(|p| &p.v_h)?,
            t,
            labels: labelled.then(|| parts.iter().flat_map(|p| p.labels.clone().unwrap_or_default()).collect()),
            resets: parts.iter().map(|p| p.resets).sum(),
            fresh: parts.iter().flat_map(|p| p.fresh.iter().copied()).collect(),
        })
    }

    /// States concatenated as rows `(x, h)`.
    pub fn joint(&self) -> Tensor {
        let n = self.num_chains();
        let mut z = Vec::with_capacity(n * (self.x.cols() + self.h.cols()));
        for i in 0..n {
            z.extend_from_slice(self.x.row_slice(i));
            z.extend_from_slice(self.h.row_slice(i));
        }
        Tensor::matrix(n, self.x.cols() + self.h.cols(), z)
    }
}

fn check_rngs(state: &ChainState, rngs: &[ChainRng]) -> Result<()> {
    if rngs.len() != state.num_chains() {
        return Err(Error::invalid(format!("{} streams for {} chains", rngs.len(), state.num_chains())));
    }
    Ok(())
}

/// The gradient `Δ` used by one revision step. For the stochastic kinds the
/// `x` part is `∂u/∂x + ∂/∂x log q(x, h) − ∂/∂x log q(x, h*)` with `h*` from
/// inner Langevin dynamics; rows still marked fresh use `h* = h`.
pub(crate) fn joint_gradient<T: LatentTarget + ?Sized>(
    cfg: &SamplerConfig,
    target: &T,
    state: &ChainState,
    rngs: &mut [ChainRng],
    delta: f64,
) -> Result<(Tensor, Tensor)> {
    let labels = state.labels.as_deref();
    if cfg.kind.uses_exact_gradient() {
        return target.exact_grad(&state.x, &state.h, labels);
    }
    let (qx, qh) = target.grad_log_q(&state.x, &state.h)?;
    let mut gx = target.grad_log_p(&state.x, labels)?;
    if state.fresh.iter().all(|&f| f) {
        return Ok((gx, qh));
    }
    let h_star =
        inner_ld_refresh(target, &state.x, &state.h, &qh, cfg.inner_steps, cfg.delta_star.unwrap_or(delta), &state.fresh, rngs)?;
    let qx_star = target.grad_x_log_q(&state.x, &h_star)?;
    let dx = gx.cols();
    for (i, &fresh) in state.fresh.iter().enumerate() {
        if fresh {
            continue;
        }
        let (a, b) = (qx.row_slice(i), qx_star.row_slice(i));
        for ((g, a), b) in gx.data_mut()[i * dx..(i + 1) * dx].iter_mut().zip(a).zip(b) {
            *g += a - b;
        }
    }
    gx.ensure_finite("stochastic gradient")?;
    Ok((gx, qh))
}

/// `h* = h + δ* ∂/∂h log q(x, h) + √(2δ*) η`, repeated `steps` times.
/// `grad_h` is the gradient at the starting `h`; rows flagged in `skip`
/// are returned unchanged and draw no noise.
#[allow(clippy::too_many_arguments)]
pub fn inner_ld_refresh<T: LatentTarget + ?Sized>(
    target: &T,
    x: &Tensor,
    h: &Tensor,
    grad_h: &Tensor,
    steps: usize,
    delta_star: f64,
    skip: &[bool],
    rngs: &mut [ChainRng],
) -> Result<Tensor> {
    let mut h_star = h.clone();
    let noise = (2.0 * delta_star).sqrt();
    let dh = h.cols();
    for k in 0..steps {
        let grad = if k == 0 { grad_h.clone() } else { target.grad_log_q(x, &h_star)?.1 };
        grad.ensure_finite("inner Langevin gradient")?;
        for (i, r) in rngs.iter_mut().enumerate() {
            if skip.get(i).copied().unwrap_or(false) {
                continue;
            }
            let row = &mut h_star.data_mut()[i * dh..(i + 1) * dh];
            for (v, g) in row.iter_mut().zip(grad.row_slice(i)) {
                *v += delta_star * g + noise * rng::normal(r);
            }
        }
    }
    Ok(h_star)
}

/// Langevin (`beta = None`) or momentum update of one chain's block.
fn update_row(z: &mut [f64], v: &mut [f64], grad: &[f64], delta: f64, beta: Option<f64>, r: &mut ChainRng) {
    match beta {
        None => {
            let s = (2.0 * delta).sqrt();
            for (zv, g) in z.iter_mut().zip(grad) {
                *zv += delta * g + s * rng::normal(r);
            }
        }
        Some(beta) => {
            let s = (2.0 * beta * delta).sqrt();
            for ((vv, zv), g) in v.iter_mut().zip(z.iter_mut()).zip(grad) {
                *vv = (1.0 - beta) * *vv + delta * g + s * rng::normal(r);
                *zv += *vv;
            }
        }
    }
}

fn row_diverged(state: &ChainState, i: usize) -> bool {
    [&state.x, &state.h, &state.v_x, &state.v_h]
        .iter()
        .any(|t| t.row_slice(i).iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT))
}

/// Reset diverged chains to fresh ancestral draws.
fn handle_divergence<T: LatentTarget + ?Sized>(
    cfg: &SamplerConfig,
    target: &T,
    state: &mut ChainState,
    rngs: &mut [ChainRng],
) -> Result<()> {
    for i in 0..state.num_chains() {
        if !row_diverged(state, i) {
            continue;
        }
        state.resets += 1;
        if state.resets > cfg.max_resets.unwrap_or(state.num_chains()) {
            return Err(Error::ChainDiverged { step: state.t });
        }
        let (x, h) = target.ancestral(&mut rngs[i..i + 1])?;
        state.x.row_slice_mut(i).copy_from_slice(x.data());
        state.h.row_slice_mut(i).copy_from_slice(h.data());
        state.v_x.row_slice_mut(i).fill(0.0);
        state.v_h.row_slice_mut(i).fill(0.0);
        state.fresh[i] = true;
    }
    Ok(())
}

/// One joint SGLD/SGHMC (or exact-gradient) step on `x` and `h` together.
pub fn revise_step<T: LatentTarget + ?Sized>(
    cfg: &SamplerConfig,
    target: &T,
    state: &mut ChainState,
    rngs: &mut [ChainRng],
) -> Result<()> {
    check_rngs(state, rngs)?;
    let delta = cfg.schedule.step_size(state.t);
    let (gx, gh) = joint_gradient(cfg, target, state, rngs, delta)?;
    let beta = cfg.kind.uses_momentum().then_some(cfg.beta);
    // per chain: x noise then h noise, so draws stay aligned across batch sizes
    for (i, r) in rngs.iter_mut().enumerate() {
        update_row(state.x.row_slice_mut(i), state.v_x.row_slice_mut(i), gx.row_slice(i), delta, beta, r);
        update_row(state.h.row_slice_mut(i), state.v_h.row_slice_mut(i), gh.row_slice(i), delta, beta, r);
    }
    state.fresh.iter_mut().for_each(|f| *f = false);
    state.t += 1;
    handle_divergence(cfg, target, state, rngs)
}

/// Interleaved baseline: `lx` Langevin steps on `x` under `∂/∂x log p`, then
/// `lh` steps on `h` under `∂/∂h log q(x, h)` with `x` fixed. Advances `t`
/// by `lx`.
pub fn coopnet_revise<T: LatentTarget + ?Sized>(
    cfg: &SamplerConfig,
    target: &T,
    state: &mut ChainState,
    lx: usize,
    lh: usize,
    rngs: &mut [ChainRng],
) -> Result<()> {
    check_rngs(state, rngs)?;
    for j in 0..lx {
        let delta = cfg.schedule.step_size(state.t + j);
        let g = target.grad_log_p(&state.x, state.labels.as_deref())?;
        g.ensure_finite("coopnet x gradient")?;
        for (i, r) in rngs.iter_mut().enumerate() {
            update_row(state.x.row_slice_mut(i), &mut [], g.row_slice(i), delta, None, r);
        }
    }
    for j in 0..lh {
        let delta = cfg.schedule.step_size(state.t + j);
        let g = target.grad_log_q(&state.x, &state.h)?.1;
        g.ensure_finite("coopnet h gradient")?;
        for (i, r) in rngs.iter_mut().enumerate() {
            update_row(state.h.row_slice_mut(i), &mut [], g.row_slice(i), delta, None, r);
        }
    }
    if lx + lh > 0 {
        state.fresh.iter_mut().for_each(|f| *f = false);
    }
    state.t += lx;
    handle_divergence(cfg, target, state, rngs)
}

/// Run `cfg.steps` joint iterations of the configured sampler.
/// CoopNet rounds up to whole `(coop_lx, coop_lh)` calls.
pub fn revise<T: LatentTarget + ?Sized>(
    cfg: &SamplerConfig,
    target: &T,
    state: &mut ChainState,
    rngs: &mut [ChainRng],
) -> Result<()> {
    cfg.validate()?;
    advance(cfg, target, state, rngs, cfg.steps)
}

/// Advance by `iterations` joint iterations.
pub fn advance<T: LatentTarget + ?Sized>(
    cfg: &SamplerConfig,
    target: &T,
    state: &mut ChainState,
    rngs: &mut [ChainRng],
    iterations: usize,
) -> Result<()> {
    let end = state.t + iterations;
    while state.t < end {
        if cfg.kind == SamplerKind::Coopnet {
            coopnet_revise(cfg, target, state, cfg.coop_lx, cfg.coop_lh, rngs)?;
        } else {
            revise_step(cfg, target, state, rngs)?;
        }
    }
    Ok(())
}
