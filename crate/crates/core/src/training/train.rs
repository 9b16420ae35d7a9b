use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::Serialize;

use super::config::TrainConfig;
use super::update::{semi_update, Optimizers};
use crate::error::{Error, Result};
use crate::models::{Checkpoint, GeneratorNet, PotentialNet};
use crate::rng::{self, domain};
use crate::tensor::Tensor;

/// Training examples: unlabeled rows plus optional labeled rows (0-based classes).
#[derive(Clone, Debug, PartialEq)]
pub struct TrainData {
    pub unlabeled: Tensor,
    pub labeled: Option<(Tensor, Vec<usize>)>,
}

impl TrainData {
    pub fn unlabeled(x: Tensor) -> Self {
        Self { unlabeled: x, labeled: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricRow {
    pub iteration: usize,
    pub mean_data_potential: f64,
    pub mean_model_potential: f64,
    pub loss_c: f64,
    pub loss_p: f64,
    /// Divergence resets since the start of training.
    pub resets: usize,
}

/// Receives metric rows and checkpoints during training.
pub trait TrainSink {
    fn metric(&mut self, row: &MetricRow) -> Result<()>;
    fn checkpoint(&mut self, iteration: usize, pot: &PotentialNet, gen: &GeneratorNet) -> Result<()>;
}

/// Keeps everything in memory.
#[derive(Clone, Debug, Default)]
pub struct MemorySink {
    pub rows: Vec<MetricRow>,
    pub checkpoints: Vec<(usize, Checkpoint, Checkpoint)>,
}

impl TrainSink for MemorySink {
    fn metric(&mut self, row: &MetricRow) -> Result<()> {
        self.rows.push(*row);
        Ok(())
    }

    fn checkpoint(&mut self, iteration: usize, pot: &PotentialNet, gen: &GeneratorNet) -> Result<()> {
        self.checkpoints.push((iteration, Checkpoint::from_potential(pot), Checkpoint::from_generator(gen)));
        Ok(())
    }
}

/// Writes `metrics.csv`, `checkpoints/{potential,generator}_NNNNNN.json`
/// and the latest `potential.json` / `generator.json` under one directory.
pub struct DirSink {
    dir: PathBuf,
    metrics: csv::Writer<File>,
}

impl DirSink {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir.join("checkpoints"))?;
        let mut metrics = csv::Writer::from_path(dir.join("metrics.csv"))?;
        metrics.write_record(["iteration", "mean_data_potential", "mean_model_potential", "loss_c", "loss_p", "resets"])?;
        metrics.flush()?;
        Ok(Self { dir: dir.to_path_buf(), metrics })
    }
}

impl TrainSink for DirSink {
    fn metric(&mut self, r: &MetricRow) -> Result<()> {
        self.metrics.write_record([
            r.iteration.to_string(),
            r.mean_data_potential.to_string(),
            r.mean_model_potential.to_string(),
            r.loss_c.to_string(),
            r.loss_p.to_string(),
            r.resets.to_string(),
        ])?;
        self.metrics.flush()?;
        Ok(())
    }

    fn checkpoint(&mut self, iteration: usize, pot: &PotentialNet, gen: &GeneratorNet) -> Result<()> {
        let (p, g) = (Checkpoint::from_potential(pot), Checkpoint::from_generator(gen));
        p.save(&self.dir.join(format!("checkpoints/potential_{iteration:06}.json")))?;
        g.save(&self.dir.join(format!("checkpoints/generator_{iteration:06}.json")))?;
        p.save(&self.dir.join("potential.json"))?;
        g.save(&self.dir.join("generator.json"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainSummary {
    pub iterations: usize,
    pub resets: usize,
    pub last: Option<MetricRow>,
}

fn minibatch(x: &Tensor, size: usize, seed: u64, stream: u64, iteration: u64) -> (Tensor, Vec<usize>) {
    let n = x.rows();
    let mut r = rng::substream(seed, domain::MINIBATCH, stream, iteration);
    let idx = index::sample(&mut r, n, size.min(n)).into_vec();
    (x.select_rows(&idx), idx)
}

/// Alternate sampling and parameter updates for `cfg.iterations` steps.
/// Checkpoints at 0, every `checkpoint_every`, and at the end.
pub fn train(
    pot: &mut PotentialNet,
    gen: &mut GeneratorNet,
    cfg: &TrainConfig,
    data: &TrainData,
    sink: &mut dyn TrainSink,
) -> Result<TrainSummary> {
    cfg.validate()?;
    if data.unlabeled.rows() == 0 {
        return Err(Error::EmptyInput("training data"));
    }
    data.unlabeled.expect_cols("training data", pot.input_dim())?;
    if let Some((x, y)) = &data.labeled {
        x.expect_cols("labeled data", pot.input_dim())?;
        if x.rows() != y.len() || x.rows() == 0 {
            return Err(Error::invalid("labeled data needs one label per row"));
        }
    }
    sink.checkpoint(0, pot, gen)?;
    let mut opt = Optimizers::default();
    let mut resets = 0usize;
    let mut last = None;
    for it in 0..cfg.iterations {
        let (batch, _) = minibatch(&data.unlabeled, cfg.batch_size, cfg.seed, 0, it as u64);
        let labeled = data.labeled.as_ref().map(|(x, y)| {
            let (xb, idx) = minibatch(x, cfg.labeled_batch_size.unwrap_or(x.rows()), cfg.seed, 1, it as u64);
            (xb, idx.iter().map(|&i| y[i]).collect::<Vec<_>>())
        });
        let diag = semi_update(pot, gen, &batch, labeled.as_ref().map(|(x, y)| (x, y.as_slice())), cfg, &mut opt, it as u64)?;
        resets += diag.resets;
        let done = it + 1;
        if done % cfg.metric_every == 0 || done == cfg.iterations {
            let row = MetricRow {
                iteration: done,
                mean_data_potential: diag.mean_data_potential,
                mean_model_potential: diag.mean_model_potential,
                loss_c: diag.loss_c,
                loss_p: diag.loss_p,
                resets,
            };
            sink.metric(&row)?;
            last = Some(row);
        }
        if cfg.checkpoint_every.is_some_and(|k| done % k == 0) && done != cfg.iterations {
            sink.checkpoint(done, pot, gen)?;
        }
    }
    if cfg.iterations > 0 {
        sink.checkpoint(cfg.iterations, pot, gen)?;
    }
    Ok(TrainSummary { iterations: cfg.iterations, resets, last })
}
