//! Potential-threshold anomaly detection: train on normal data only, flag
//! the lowest-potential test points.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autodiff::Activation;
use crate::error::{Error, Result};
use crate::evaluation::{prf_at_quantile, roc_auc, write_metrics, Prf};
use crate::experiments::{init_models, MlpConfig};
use crate::models::PotentialNet;
use crate::rng::{self, domain};
use crate::samplers::SamplerConfig;
use crate::targets::{gmm32, gmm_sample, read_table};
use crate::tensor::Tensor;
use crate::training::{train, DirSink, MemorySink, TrainConfig, TrainData, TrainSink, TrainSummary};

/// Where normal training data and the labeled test set come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnomalyData {
    /// Normal = inner two rings of the 32-mode mixture, anomalies = outer two.
    Synthetic { train_points: usize, test_normal: usize, test_anomalies: usize },
    /// Headered CSVs. Rows whose label equals `anomaly_label` are anomalies;
    /// they are dropped from the training file if it carries labels.
    Csv { train: PathBuf, test: PathBuf, label_column: String, anomaly_label: i64 },
}

fn default_quantile() -> f64 {
    0.2
}
fn default_latent() -> usize {
    2
}
fn default_sigma() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnomalyRecipe {
    #[serde(default)]
    pub seed: u64,
    pub data: AnomalyData,
    #[serde(default = "default_latent")]
    pub latent_dim: usize,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub potential: MlpConfig,
    pub generator: MlpConfig,
    pub train: TrainConfig,
    /// Fraction of the test set flagged as anomalous.
    #[serde(default = "default_quantile")]
    pub quantile: f64,
}

impl AnomalyRecipe {
    /// Ring recipe: 2000 normal training points, 800 normal plus 200
    /// anomalous test points, GMM nets, `α_p = 0.1`.
    pub fn synthetic(iterations: usize) -> Self {
        let mut train = TrainConfig::gmm_default(iterations);
        train.alpha_p = 0.1;
        Self {
            seed: 0,
            data: AnomalyData::Synthetic { train_points: 2000, test_normal: 800, test_anomalies: 200 },
            latent_dim: default_latent(),
            sigma: default_sigma(),
            potential: MlpConfig::gmm_potential(),
            generator: MlpConfig::gmm_generator(),
            train,
            quantile: default_quantile(),
        }
    }

    /// Tabular preset with Tanh nets (60-30-10 potential, 10-30-60 generator
    /// with batch norm), 5-D latent, batch 1024, Adam(0.5, 0.999).
    pub fn tabular(train_csv: PathBuf, test_csv: PathBuf, label_column: String, iterations: usize) -> Self {
        let mut train = TrainConfig::gmm_default(iterations);
        train.batch_size = 1024;
        train.beta2 = 0.999;
        train.lr_potential = 1e-4;
        train.lr_generator = 3e-4;
        train.alpha_p = 0.1;
        train.sampler = SamplerConfig::sgld(10, 0.01);
        Self {
            seed: 0,
            data: AnomalyData::Csv { train: train_csv, test: test_csv, label_column, anomaly_label: 1 },
            latent_dim: 5,
            sigma: default_sigma(),
            potential: MlpConfig { hidden: vec![60, 30, 10], activation: Activation::Tanh, weight_norm: true, batch_norm: false },
            generator: MlpConfig { hidden: vec![10, 30, 60], activation: Activation::Tanh, weight_norm: false, batch_norm: true },
            train,
            quantile: default_quantile(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return Err(Error::Config(format!("quantile must lie in (0, 1), got {}", self.quantile)));
        }
        if let AnomalyData::Synthetic { train_points, test_normal, test_anomalies } = self.data {
            if train_points == 0 || test_normal == 0 || test_anomalies == 0 {
                return Err(Error::Config("synthetic anomaly recipe needs non-empty splits".into()));
            }
        }
        self.train.validate()
    }
}

/// Loaded splits: normal-only training data and a labeled test set.
#[derive(Clone, Debug)]
pub struct AnomalySplits {
    pub train: Tensor,
    pub test: Tensor,
    pub is_anomaly: Vec<bool>,
}

pub fn load_splits(data: &AnomalyData, seed: u64) -> Result<AnomalySplits> {
    match data {
        AnomalyData::Synthetic { train_points, test_normal, test_anomalies } => {
            let all = gmm32();
            let normal = all.subset_classes(&[0, 1])?;
            let outer = all.subset_classes(&[2, 3])?;
            let train = gmm_sample(&normal, *train_points, &mut rng::stream(seed, domain::DATA, 0))?.points;
            let tn = gmm_sample(&normal, *test_normal, &mut rng::stream(seed, domain::DATA, 1))?.points;
            let ta = gmm_sample(&outer, *test_anomalies, &mut rng::stream(seed, domain::DATA, 2))?.points;
            let mut is_anomaly = vec![false; *test_normal];
            is_anomaly.resize(test_normal + test_anomalies, true);
            Ok(AnomalySplits { train, test: Tensor::vstack(&[tn, ta])?, is_anomaly })
        }
        AnomalyData::Csv { train, test, label_column, anomaly_label } => {
            let tr = read_table(train, Some(label_column)).or_else(|e| match e {
                Error::InvalidArgument(ref m) if m.contains("no column named") => read_table(train, None),
                other => Err(other),
            })?;
            let train_x = match tr.labels {
                Some(labels) => {
                    let keep: Vec<Vec<f64>> = tr
                        .features
                        .row_iter()
                        .zip(&labels)
                        .filter(|(_, &l)| l != *anomaly_label)
                        .map(|(r, _)| r.to_vec())
                        .collect();
                    if keep.is_empty() {
                        return Err(Error::EmptyInput("normal training rows"));
                    }
                    Tensor::from_rows(&keep)?
                }
                None => tr.features,
            };
            let te = read_table(test, Some(label_column))?;
            if te.features.cols() != train_x.cols() {
                return Err(Error::ShapeMismatch {
                    context: "anomaly test features",
                    expected: vec![train_x.cols()],
                    actual: vec![te.features.cols()],
                });
            }
            let is_anomaly = te.labels.unwrap_or_default().iter().map(|&l| l == *anomaly_label).collect();
            Ok(AnomalySplits { train: train_x, test: te.features, is_anomaly })
        }
    }
}

/// Anomaly score: the marginal potential; higher means more normal.
pub fn score(pot: &PotentialNet, x: &Tensor) -> Result<Vec<f64>> {
    pot.potentials(x)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnomalyReport {
    pub prf: Prf,
    pub auc: f64,
    pub mean_normal_score: f64,
    pub mean_anomaly_score: f64,
    pub train: TrainSummary,
}

/// Metrics for a fixed score vector.
pub fn evaluate_scores(scores: &[f64], is_anomaly: &[bool], quantile: f64) -> Result<(Prf, f64)> {
    Ok((prf_at_quantile(scores, is_anomaly, quantile)?, roc_auc(scores, is_anomaly)?))
}

fn mean_where(scores: &[f64], mask: &[bool], want: bool) -> f64 {
    let (s, n) = scores.iter().zip(mask).filter(|(_, &m)| m == want).fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Train on normal data, score the test set, and (with `out`) write
/// `anomaly.csv`, `scores.csv` and the training artifacts.
pub fn run_anomaly(recipe: &AnomalyRecipe, out: Option<&Path>) -> Result<AnomalyReport> {
    recipe.validate()?;
    let splits = load_splits(&recipe.data, recipe.seed)?;
    let dim = splits.train.cols();
    let (mut pot, mut gen) =
        init_models(recipe.seed, dim, 1, recipe.latent_dim, recipe.sigma, &recipe.potential, &recipe.generator)?;
    let mut tcfg = recipe.train.clone();
    tcfg.seed = recipe.seed;
    let mut mem = MemorySink::default();
    let mut dir_sink;
    let sink: &mut dyn TrainSink = match out {
        Some(dir) => {
            dir_sink = DirSink::new(dir)?;
            &mut dir_sink
        }
        None => &mut mem,
    };
    let summary = train(&mut pot, &mut gen, &tcfg, &TrainData::unlabeled(splits.train), sink)?;

    let scores = score(&pot, &splits.test)?;
    let (prf, auc) = evaluate_scores(&scores, &splits.is_anomaly, recipe.quantile)?;
    if let Some(dir) = out {
        write_metrics(
            &dir.join("anomaly.csv"),
            &[("precision", prf.precision), ("recall", prf.recall), ("f1", prf.f1), ("auc", auc)],
        )?;
        let mut w = csv::Writer::from_path(dir.join("scores.csv"))?;
        w.write_record(["index", "score", "label"])?;
        for (i, (s, &a)) in scores.iter().zip(&splits.is_anomaly).enumerate() {
            w.write_record([i.to_string(), s.to_string(), u8::from(a).to_string()])?;
        }
        w.flush()?;
    }
    Ok(AnomalyReport {
        prf,
        auc,
        mean_normal_score: mean_where(&scores, &splits.is_anomaly, false),
        mean_anomaly_score: mean_where(&scores, &splits.is_anomaly, true),
        train: summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_splits_are_disjoint_rings() {
        let s = load_splits(&AnomalyRecipe::synthetic(0).data, 3).unwrap();
        assert_eq!(s.train.rows(), 2000);
        assert_eq!(s.test.rows(), 1000);
        assert_eq!(s.is_anomaly.iter().filter(|&&a| a).count(), 200);
        // Ring radii are 1..4 with σ = 0.1, so 2.5 separates inner from outer.
        for (r, &a) in s.test.row_iter().zip(&s.is_anomaly) {
            assert_eq!(r[0].hypot(r[1]) > 2.5, a);
        }
        assert!(s.train.row_iter().all(|r| r[0].hypot(r[1]) < 2.5));
    }

    #[test]
    fn separated_scores_give_perfect_metrics() {
        let scores = [5.0, -3.0, 4.0, 6.0, -2.0, 7.0, 8.0, 9.0, 3.0, 4.5];
        let labels: Vec<bool> = scores.iter().map(|&s| s < 0.0).collect();
        let (prf, auc) = evaluate_scores(&scores, &labels, 0.2).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f1, auc), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn bad_quantile_is_config_error() {
        let mut r = AnomalyRecipe::synthetic(1);
        r.quantile = 1.0;
        assert!(r.validate().unwrap_err().is_config_error());
    }
}
