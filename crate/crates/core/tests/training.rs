mod common;

use common::*;
use nrf::models::{Checkpoint, PotentialNet};
use nrf::rng;
use nrf::training::{
    confidence_loss, potential_control_loss, semi_update, supervised_log_likelihood, theta_ascent, train, unsup_update,
    AdamConfig, AdamState, Alphas, MemorySink, Optimizers, TrainConfig, TrainData,
};
use nrf::Tensor;
use proptest::prelude::*;

fn cloud(n: usize, seed: u64, shift: f64) -> Tensor {
    let mut r = rng::stream(seed, 1, 0);
    let mut v = vec![0.0; 2 * n];
    rng::fill_normal(&mut r, &mut v);
    Tensor::matrix(n, 2, v.into_iter().map(|z| z + shift).collect())
}

/// Central differences of `f` over every scalar parameter of `pot`.
fn param_fd(pot: &PotentialNet, f: impl Fn(&PotentialNet) -> f64) -> Vec<(String, usize, f64)> {
    let eps = 1e-6;
    let mut out = Vec::new();
    let names: Vec<String> = pot.params.names().cloned().collect();
    for name in names {
        for j in 0..pot.params.get(&name).unwrap().len() {
            let mut up = pot.clone();
            up.params.get_mut(&name).unwrap().data_mut()[j] += eps;
            let mut dn = pot.clone();
            dn.params.get_mut(&name).unwrap().data_mut()[j] -= eps;
            out.push((name.clone(), j, (f(&up) - f(&dn)) / (2.0 * eps)));
        }
    }
    out
}

fn entropy(pot: &PotentialNet, xs: &Tensor) -> f64 {
    xs.row_iter().map(|x| -pot.classifier_probs(x).unwrap().iter().map(|p| p * p.ln()).sum::<f64>()).sum::<f64>()
        / xs.rows() as f64
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn assert_grads_close(grads: &nrf::autodiff::ParamSet, fd: &[(String, usize, f64)], tol: f64) {
    for (name, j, want) in fd {
        let got = grads.get(name).unwrap().data()[*j];
        assert!((got - want).abs() <= tol * want.abs().max(1e-3), "{name}[{j}]: {got} vs {want}");
    }
}

#[test]
fn regularizer_gradients_match_finite_differences() {
    let pot = small_potential(3, 5);
    let xs = cloud(7, 5, 0.0);
    let labels = [0, 1, 2, 2, 1, 0, 0];

    let (h, g) = confidence_loss(&pot, &xs).unwrap();
    assert!((h - entropy(&pot, &xs)).abs() < 1e-12);
    assert!(h >= 0.0 && h <= 3f64.ln());
    assert_grads_close(&g, &param_fd(&pot, |p| entropy(p, &xs)), 1e-5);

    let ctrl = |p: &PotentialNet| mean(&p.potentials(&xs).unwrap().iter().map(|u| u * u).collect::<Vec<_>>());
    let (l, g) = potential_control_loss(&pot, &xs).unwrap();
    assert!((l - ctrl(&pot)).abs() < 1e-12);
    assert_grads_close(&g, &param_fd(&pot, ctrl), 1e-5);

    let ll = |p: &PotentialNet| {
        xs.row_iter().zip(labels).map(|(x, y)| p.classifier_probs(x).unwrap()[y].ln()).sum::<f64>() / labels.len() as f64
    };
    let (v, g) = supervised_log_likelihood(&pot, &xs, &labels).unwrap();
    assert!((v - ll(&pot)).abs() < 1e-12);
    assert_grads_close(&g, &param_fd(&pot, ll), 1e-5);
}

#[test]
fn theta_ascent_is_the_gradient_of_the_regularised_objective() {
    let pot = small_potential(2, 8);
    let data = cloud(6, 1, 0.5);
    let model = cloud(5, 2, -0.5);
    let lx = cloud(4, 3, 0.0);
    let ly = [0usize, 1, 1, 0];
    let a = Alphas { d: 2.0, c: 0.7, p: 0.3 };
    let objective = |p: &PotentialNet| {
        let ud = p.potentials(&data).unwrap();
        let um = p.potentials(&model).unwrap();
        let sup = lx.row_iter().zip(ly).map(|(x, y)| p.classifier_probs(x).unwrap()[y].ln()).sum::<f64>() / 4.0;
        let lp = mean(&ud.iter().map(|u| u * u).collect::<Vec<_>>());
        mean(&ud) - mean(&um) + a.d * sup - a.c * entropy(p, &data) - a.p * lp
    };
    let (g, diag) = theta_ascent(&pot, &data, &model, Some((&lx, &ly)), a).unwrap();
    assert_grads_close(&g, &param_fd(&pot, objective), 1e-5);
    assert!((diag.mean_data_potential - mean(&pot.potentials(&data).unwrap())).abs() < 1e-12);
    assert!((diag.mean_model_potential - mean(&pot.potentials(&model).unwrap())).abs() < 1e-12);
}

#[test]
fn theta_ascent_vanishes_when_model_equals_data() {
    let pot = small_potential(1, 3);
    let xs = cloud(9, 4, 0.0);
    let (g, _) = theta_ascent(&pot, &xs, &xs, None, Alphas::default()).unwrap();
    assert!(g.max_abs() < 1e-14, "{}", g.max_abs());
}

#[test]
fn first_adam_step_is_learning_rate_times_normalised_gradient() {
    let mut pot = small_potential(1, 2);
    let before = pot.clone();
    let (_, g) = potential_control_loss(&pot, &cloud(5, 2, 0.0)).unwrap();
    let cfg = AdamConfig::new(1e-3);
    let mut state = AdamState::new();
    state.step(&mut pot.params, &g, &cfg).unwrap();
    for (name, t) in pot.params.iter() {
        for ((new, old), gi) in t.data().iter().zip(before.params.get(name).unwrap().data()).zip(g.get(name).unwrap().data()) {
            let want = old - 1e-3 * gi / (gi.abs() + 1e-8);
            assert!((new - want).abs() < 1e-15, "{name}");
        }
    }
    assert_eq!(state.steps(), 1);
}

#[test]
fn zero_weight_semi_update_equals_unsupervised_update() {
    let cfg = TrainConfig::gmm_default(1);
    let data = cloud(20, 6, 0.0);
    let lx = cloud(4, 7, 0.0);
    let ly = [0usize, 1, 0, 1];
    let (mut p1, mut g1) = (small_potential(2, 1), small_generator(2, 1));
    let (mut p2, mut g2) = (p1.clone(), g1.clone());
    let d1 = unsup_update(&mut p1, &mut g1, &data, &cfg, &mut Optimizers::default(), 0).unwrap();
    let mut semi = cfg.clone();
    semi.alpha_d = 0.0;
    let d2 = semi_update(&mut p2, &mut g2, &data, Some((&lx, &ly)), &semi, &mut Optimizers::default(), 0).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(p1, p2);
    assert_eq!(g1, g2);
}

fn quick_config(iterations: usize) -> TrainConfig {
    let mut cfg = TrainConfig::gmm_default(iterations);
    cfg.batch_size = 32;
    cfg.metric_every = 5;
    cfg.seed = 11;
    cfg
}

#[test]
fn zero_iterations_only_checkpoints_the_initial_state() {
    let (mut p, mut g) = (small_potential(1, 0), small_generator(2, 0));
    let (p0, g0) = (p.clone(), g.clone());
    let mut sink = MemorySink::default();
    let s = train(&mut p, &mut g, &quick_config(0), &TrainData::unlabeled(cloud(50, 0, 0.0)), &mut sink).unwrap();
    assert_eq!(s.iterations, 0);
    assert!(sink.rows.is_empty());
    assert_eq!(sink.checkpoints.len(), 1);
    assert_eq!(sink.checkpoints[0].0, 0);
    assert_eq!(sink.checkpoints[0].1, Checkpoint::from_potential(&p0));
    assert_eq!(sink.checkpoints[0].2, Checkpoint::from_generator(&g0));
    assert_eq!((p, g), (p0, g0));
}

#[test]
fn training_is_deterministic_and_logs_on_schedule() {
    let data = TrainData::unlabeled(cloud(80, 3, 1.0));
    let run = || {
        let (mut p, mut g) = (small_potential(1, 4), small_generator(2, 4));
        let mut cfg = quick_config(12);
        cfg.checkpoint_every = Some(4);
        let mut sink = MemorySink::default();
        train(&mut p, &mut g, &cfg, &data, &mut sink).unwrap();
        (p, g, sink)
    };
    let (p1, g1, s1) = run();
    let (p2, g2, s2) = run();
    assert_eq!(p1, p2);
    assert_eq!(g1, g2);
    assert_eq!(s1.rows, s2.rows);
    assert_eq!(s1.rows.iter().map(|r| r.iteration).collect::<Vec<_>>(), vec![5, 10, 12]);
    assert_eq!(s1.checkpoints.iter().map(|c| c.0).collect::<Vec<_>>(), vec![0, 4, 8, 12]);
}

#[test]
fn strong_supervision_fits_the_labeled_points() {
    let labeled = Tensor::from_rows(&[[-2.0, 0.0], [-1.5, 0.5], [2.0, 0.0], [1.5, -0.5]]).unwrap();
    let labels = vec![0, 0, 1, 1];
    let data = TrainData { unlabeled: cloud(100, 9, 0.0), labeled: Some((labeled.clone(), labels.clone())) };
    let (mut p, mut g) = (small_potential(2, 6), small_generator(2, 6));
    let mut cfg = quick_config(150);
    cfg.alpha_d = 50.0;
    cfg.lr_potential = 3e-3;
    train(&mut p, &mut g, &cfg, &data, &mut MemorySink::default()).unwrap();
    assert_eq!(p.predict(&labeled).unwrap(), labels);
}

#[test]
fn potential_rises_on_data_relative_to_model_samples() {
    // Data sits far from the generator's initial mass, so the first updates
    // must raise u on data above u on model draws.
    let data = TrainData::unlabeled(cloud(200, 2, 3.0));
    let (mut p, mut g) = (small_potential(1, 2), small_generator(2, 2));
    let mut cfg = quick_config(60);
    cfg.metric_every = 60;
    let mut sink = MemorySink::default();
    train(&mut p, &mut g, &cfg, &data, &mut sink).unwrap();
    let last = sink.rows.last().unwrap();
    assert!(last.mean_data_potential > last.mean_model_potential, "{last:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn confidence_loss_is_bounded_by_log_k(seed in 0u64..10_000, k in 2usize..6) {
        let pot = small_potential(k, seed);
        let (h, _) = confidence_loss(&pot, &cloud(5, seed, 0.0)).unwrap();
        prop_assert!(h >= 0.0 && h <= (k as f64).ln() + 1e-12);
    }
}
