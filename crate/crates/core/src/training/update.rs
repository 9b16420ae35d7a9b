use serde::Serialize;

use super::adam::AdamState;
use super::config::TrainConfig;
use super::losses::{confidence_seed, control_seed, supervised_seed};
use crate::autodiff::{Graph, Mode, ParamSet};
use crate::error::Result;
use crate::models::{heads_to_potentials, marginal_seed, GeneratorNet, PotentialNet};
use crate::rng::{self, domain};
use crate::samplers::{sample_model, ChainState};
use crate::tensor::Tensor;

/// Regularizer weights for the potential update.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Alphas {
    pub d: f64,
    pub c: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct StepDiagnostics {
    pub mean_data_potential: f64,
    pub mean_model_potential: f64,
    pub loss_c: f64,
    pub loss_p: f64,
    pub resets: usize,
}

/// Both optimizers of a training run.
#[derive(Clone, Debug, Default)]
pub struct Optimizers {
    pub potential: AdamState,
    pub generator: AdamState,
}

/// θ ascent direction:
/// `mean ∇u(x̃) − mean ∇u(x) + α_d mean ∇log p(ỹ|x̃) − α_c ∇L_c − α_p ∇L_p`,
/// with `L_c` and `L_p` taken on the unlabeled batch.
pub fn theta_ascent(
    pot: &PotentialNet,
    data: &Tensor,
    model_x: &Tensor,
    labeled: Option<(&Tensor, &[usize])>,
    alphas: Alphas,
) -> Result<(ParamSet, StepDiagnostics)> {
    let mut diag = StepDiagnostics::default();
    let classes = pot.num_outputs() >= 2;
    let (_, mut grads) = pot.heads_with_param_grad(data, |heads| {
        let u = heads_to_potentials(heads)?;
        let n = u.len() as f64;
        diag.mean_data_potential = u.iter().sum::<f64>() / n;
        let mut seed = marginal_seed(heads, Some(&vec![1.0 / n; u.len()]));
        let (lp, sp) = control_seed(heads)?;
        diag.loss_p = lp;
        seed.axpy(-alphas.p, &sp);
        if classes {
            let (lc, sc) = confidence_seed(heads)?;
            diag.loss_c = lc;
            seed.axpy(-alphas.c, &sc);
        }
        Ok(seed)
    })?;
    let (_, model_grads) = pot.heads_with_param_grad(model_x, |heads| {
        let u = heads_to_potentials(heads)?;
        let n = u.len() as f64;
        diag.mean_model_potential = u.iter().sum::<f64>() / n;
        Ok(marginal_seed(heads, Some(&vec![-1.0 / n; u.len()])))
    })?;
    grads.add_scaled(1.0, &model_grads)?;
    if let Some((xs, ys)) = labeled {
        if alphas.d != 0.0 {
            let (_, sup) = pot.heads_with_param_grad(xs, |heads| {
                let (_, mut s) = supervised_seed(heads, ys)?;
                s.scale(alphas.d);
                Ok(s)
            })?;
            grads.add_scaled(1.0, &sup)?;
        }
    }
    Ok((grads, diag))
}

/// φ ascent direction `mean ∇_φ log q_φ(x, h)` over revised pairs, with
/// batch norm in train mode. The graph carries the batch statistics.
pub fn phi_ascent(gen: &GeneratorNet, model: &ChainState) -> Result<(ParamSet, Graph)> {
    gen.param_grad(&model.x, &model.h, Mode::Train)
}

/// Draw one revised model sample per unlabeled data point, chain `i`
/// seeded by `(seed, iteration, i)`.
pub fn draw_model_samples(
    pot: &PotentialNet,
    gen: &GeneratorNet,
    cfg: &TrainConfig,
    n: usize,
    iteration: u64,
) -> Result<ChainState> {
    sample_model(pot, gen, &cfg.sampler, n, |i| rng::substream(cfg.seed, domain::CHAIN, iteration, i as u64))
}

fn apply(
    pot: &mut PotentialNet,
    gen: &mut GeneratorNet,
    theta: ParamSet,
    phi: ParamSet,
    graph: &Graph,
    opt: &mut Optimizers,
    cfg: &TrainConfig,
) -> Result<()> {
    let mut theta = theta;
    theta.scale(-1.0);
    opt.potential.step(&mut pot.params, &theta, &cfg.potential_adam())?;
    let mut phi = phi;
    phi.scale(-1.0);
    opt.generator.step(&mut gen.params, &phi, &cfg.generator_adam())?;
    graph.commit_running_stats(&mut gen.params)
}

/// One unsupervised update on a data minibatch.
pub fn unsup_update(
    pot: &mut PotentialNet,
    gen: &mut GeneratorNet,
    data: &Tensor,
    cfg: &TrainConfig,
    opt: &mut Optimizers,
    iteration: u64,
) -> Result<StepDiagnostics> {
    semi_update(pot, gen, data, None, cfg, opt, iteration)
}

/// One semi-supervised update; with `labeled = None` or zero `alpha_d` and
/// `alpha_c` it reduces to [`unsup_update`].
pub fn semi_update(
    pot: &mut PotentialNet,
    gen: &mut GeneratorNet,
    data: &Tensor,
    labeled: Option<(&Tensor, &[usize])>,
    cfg: &TrainConfig,
    opt: &mut Optimizers,
    iteration: u64,
) -> Result<StepDiagnostics> {
    let model = draw_model_samples(pot, gen, cfg, data.rows(), iteration)?;
    let (theta, mut diag) = theta_ascent(pot, data, &model.x, labeled, cfg.alphas())?;
    diag.resets = model.resets;
    let (phi, graph) = phi_ascent(gen, &model)?;
    apply(pot, gen, theta, phi, &graph, opt, cfg)?;
    Ok(diag)
}
