use serde::Serialize;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Squared distance within which a sample counts as realistic for its nearest mode.
pub const REALISM_THRESHOLD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeCoverageReport {
    pub covered_mean: f64,
    pub covered_sd: f64,
    pub ratio_mean: f64,
    pub ratio_sd: f64,
    /// `(covered, ratio)` for each repetition.
    pub per_rep: Vec<(usize, f64)>,
}

/// Covered modes and realistic fraction of one sample set. Each sample can
/// certify only its nearest mode.
pub fn coverage_once(samples: &Tensor, modes: &[[f64; 2]], threshold: f64) -> Result<(usize, f64)> {
    if modes.is_empty() {
        return Err(Error::EmptyInput("modes"));
    }
    samples.expect_cols("coverage samples", 2)?;
    if samples.rows() == 0 {
        return Err(Error::EmptyInput("coverage samples"));
    }
    let mut hit = vec![false; modes.len()];
    let mut realistic = 0usize;
    for s in samples.row_iter() {
        let (best, d2) = modes
            .iter()
            .enumerate()
            .map(|(j, m)| (j, (s[0] - m[0]).powi(2) + (s[1] - m[1]).powi(2)))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if d2 < threshold {
            hit[best] = true;
            realistic += 1;
        }
    }
    Ok((hit.iter().filter(|&&h| h).count(), realistic as f64 / samples.rows() as f64))
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (m, var.sqrt())
}

/// Repeat `coverage_once` on `reps` sample sets from `source(rep)`.
/// Standard deviations use the `n - 1` normalizer.
pub fn mode_coverage<F>(mut source: F, modes: &[[f64; 2]], reps: usize, threshold: f64) -> Result<ModeCoverageReport>
where
    F: FnMut(usize) -> Result<Tensor>,
{
    if reps == 0 {
        return Err(Error::EmptyInput("coverage repetitions"));
    }
    let per_rep = (0..reps).map(|r| coverage_once(&source(r)?, modes, threshold)).collect::<Result<Vec<_>>>()?;
    let (covered_mean, covered_sd) = mean_sd(&per_rep.iter().map(|p| p.0 as f64).collect::<Vec<_>>());
    let (ratio_mean, ratio_sd) = mean_sd(&per_rep.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(ModeCoverageReport { covered_mean, covered_sd, ratio_mean, ratio_sd, per_rep })
}
