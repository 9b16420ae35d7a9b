use std::path::Path;

use serde::{Deserialize, Serialize};

use super::gmm_unsup::init_models;
use super::nets::MlpConfig;
use crate::autodiff::logsumexp;
use crate::error::{Error, Result};
use crate::evaluation::write_metrics;
use crate::models::PotentialNet;
use crate::rng::{self, domain};
use crate::targets::{gmm16_ssl, gmm_sample, write_points, GmmSpec};
use crate::tensor::Tensor;
use crate::training::{train, DirSink, MemorySink, TrainConfig, TrainData, TrainSink, TrainSummary};

fn default_unlabeled() -> usize {
    400
}
fn default_per_class() -> usize {
    4
}
fn default_heldout() -> usize {
    1000
}
fn default_latent() -> usize {
    2
}
fn default_sigma() -> f64 {
    1.0
}

/// Square evaluation grid `[lo, hi]²` with `resolution` points per side.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { lo: -3.0, hi: 3.0, resolution: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GmmSslConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_unlabeled")]
    pub unlabeled: usize,
    #[serde(default = "default_per_class")]
    pub labeled_per_class: usize,
    #[serde(default = "default_heldout")]
    pub heldout: usize,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub potential: MlpConfig,
    pub generator: MlpConfig,
    pub train: TrainConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

impl GmmSslConfig {
    /// Two-ring toy with `α_d = α_c = 10` and light potential control.
    pub fn preset(iterations: usize) -> Self {
        let mut train = TrainConfig::gmm_default(iterations);
        train.alpha_d = 10.0;
        train.alpha_c = 10.0;
        // Without potential control the unnormalised potential drifts off after a few thousand steps.
        train.alpha_p = 0.1;
        Self {
            seed: 0,
            unlabeled: default_unlabeled(),
            labeled_per_class: default_per_class(),
            heldout: default_heldout(),
            latent_dim: default_latent(),
            sigma: default_sigma(),
            potential: MlpConfig::gmm_potential(),
            generator: MlpConfig::gmm_generator(),
            train,
            grid: GridConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GmmSslReport {
    pub labeled_correct: usize,
    pub labeled_total: usize,
    pub heldout_accuracy: f64,
    /// Largest `|u(x) − logsumexp_y u(x, y)|` over the grid.
    pub grid_identity_error: f64,
    pub train: TrainSummary,
}

/// Draw mixture points until every class has `per_class` of them.
pub fn labeled_draw(spec: &GmmSpec, per_class: usize, seed: u64) -> Result<(Tensor, Vec<usize>)> {
    let k = spec.num_classes();
    let mut rng = rng::stream(seed, domain::DATA, 1);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels = Vec::new();
    let mut counts = vec![0usize; k];
    while counts.iter().any(|&c| c < per_class) {
        let s = gmm_sample(spec, 1, &mut rng)?;
        let c = s.classes[0];
        if counts[c] < per_class {
            counts[c] += 1;
            rows.push(s.points.into_data());
            labels.push(c);
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput("labeled examples"));
    }
    Ok((Tensor::from_rows(&rows)?, labels))
}

fn accuracy(pot: &PotentialNet, x: &Tensor, y: &[usize]) -> Result<usize> {
    Ok(pot.predict(x)?.iter().zip(y).filter(|(a, b)| a == b).count())
}

/// Potentials on the grid: `(points, u, class potentials)`.
pub fn potential_grid(pot: &PotentialNet, grid: &GridConfig) -> Result<(Tensor, Vec<f64>, Tensor)> {
    let n = grid.resolution;
    if n < 2 {
        return Err(Error::Config("grid resolution must be at least 2".into()));
    }
    let step = (grid.hi - grid.lo) / (n - 1) as f64;
    let mut pts = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            pts.push(grid.lo + j as f64 * step);
            pts.push(grid.lo + i as f64 * step);
        }
    }
    let pts = Tensor::matrix(n * n, 2, pts);
    let u = pot.potentials(&pts)?;
    let heads = pot.heads(&pts)?;
    Ok((pts, u, heads))
}

/// Semi-supervised two-ring experiment. With `out`, writes training
/// artifacts, `accuracy.csv`, `grid.csv` and the labeled points.
pub fn run_gmm_ssl(cfg: &GmmSslConfig, out: Option<&Path>) -> Result<GmmSslReport> {
    let spec = gmm16_ssl();
    let k = spec.num_classes();
    let unl = gmm_sample(&spec, cfg.unlabeled, &mut rng::stream(cfg.seed, domain::DATA, 0))?;
    let (lx, ly) = labeled_draw(&spec, cfg.labeled_per_class, cfg.seed)?;
    let held = gmm_sample(&spec, cfg.heldout, &mut rng::stream(cfg.seed, domain::DATA, 2))?;
    let (mut pot, mut gen) = init_models(cfg.seed, 2, k, cfg.latent_dim, cfg.sigma, &cfg.potential, &cfg.generator)?;
    let mut tcfg = cfg.train.clone();
    tcfg.seed = cfg.seed;
    let data = TrainData { unlabeled: unl.points, labeled: Some((lx.clone(), ly.clone())) };
    let mut mem = MemorySink::default();
    let mut dir_sink;
    let sink: &mut dyn TrainSink = match out {
        Some(dir) => {
            dir_sink = DirSink::new(dir)?;
            &mut dir_sink
        }
        None => &mut mem,
    };
    let summary = train(&mut pot, &mut gen, &tcfg, &data, sink)?;

    let labeled_correct = accuracy(&pot, &lx, &ly)?;
    let heldout_accuracy = accuracy(&pot, &held.points, &held.classes)? as f64 / cfg.heldout as f64;
    let (pts, u, heads) = potential_grid(&pot, &cfg.grid)?;
    let mut grid_identity_error = 0.0f64;
    for (ui, h) in u.iter().zip(heads.row_iter()) {
        grid_identity_error = grid_identity_error.max((ui - logsumexp(h)?).abs());
    }
    if let Some(dir) = out {
        write_metrics(
            &dir.join("accuracy.csv"),
            &[
                ("labeled_accuracy", labeled_correct as f64 / ly.len() as f64),
                ("heldout_accuracy", heldout_accuracy),
                ("grid_identity_error", grid_identity_error),
            ],
        )?;
        let mut w = csv::Writer::from_path(dir.join("grid.csv"))?;
        let mut header = vec!["x1".to_string(), "x2".to_string(), "u".to_string()];
        header.extend((1..=k).map(|c| format!("u_y{c}")));
        w.write_record(&header)?;
        for (i, (p, h)) in pts.row_iter().zip(heads.row_iter()).enumerate() {
            let mut rec = vec![p[0].to_string(), p[1].to_string(), u[i].to_string()];
            rec.extend(h.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        write_points(&dir.join("labeled.csv"), &lx, Some(&ly))?;
    }
    Ok(GmmSslReport { labeled_correct, labeled_total: ly.len(), heldout_accuracy, grid_identity_error, train: summary })
}
