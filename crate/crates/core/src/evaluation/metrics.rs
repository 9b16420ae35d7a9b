use serde::Serialize;

use crate::error::{Error, Result};

/// ROC AUC with anomalies as positives and lower scores flagged first:
/// the probability that a random anomaly scores below a random normal
/// sample, ties counting one half.
pub fn roc_auc(scores: &[f64], is_anomaly: &[bool]) -> Result<f64> {
    if scores.len() != is_anomaly.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("anomaly score".into()));
    }
    let n_pos = is_anomaly.iter().filter(|&&a| a).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid("AUC needs both anomalies and normal samples"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Mann-Whitney: count normals strictly above each anomaly, ties as 1/2
    let mut wins = 0.0;
    let mut normals_below = 0usize;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            j += 1;
        }
        let pos = idx[i..j].iter().filter(|&&k| is_anomaly[k]).count();
        let neg = (j - i) - pos;
        let normals_above = n_neg - normals_below - neg;
        wins += pos as f64 * (normals_above as f64 + 0.5 * neg as f64);
        normals_below += neg;
        i = j;
    }
    Ok(wins / (n_pos as f64 * n_neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub flagged: usize,
}

/// Flag the `⌊quantile · N⌋` lowest scores (stable order on ties) as
/// anomalies and score the flags against the labels.
pub fn prf_at_quantile(scores: &[f64], is_anomaly: &[bool], quantile: f64) -> Result<Prf> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("prf scores"));
    }
    if scores.len() != is_anomaly.len() {
        return Err(Error::invalid("scores and labels differ in length"));
    }
    if !(quantile > 0.0 && quantile < 1.0) {
        return Err(Error::invalid(format!("quantile must lie in (0, 1), got {quantile}")));
    }
    let k = (quantile * scores.len() as f64 + 1e-9).floor() as usize;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let tp = idx[..k].iter().filter(|&&i| is_anomaly[i]).count() as f64;
    let positives = is_anomaly.iter().filter(|&&a| a).count() as f64;
    let precision = if k > 0 { tp / k as f64 } else { 0.0 };
    let recall = if positives > 0.0 { tp / positives } else { 0.0 };
    let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
    Ok(Prf { precision, recall, f1, flagged: k })
}
