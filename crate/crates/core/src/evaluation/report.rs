use std::path::Path;

use super::{KlCurve, ModeCoverageReport};
use crate::error::Result;

/// `sampler,iteration,kl` for every curve.
pub fn write_kl_curves(path: &Path, curves: &[KlCurve]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sampler", "iteration", "kl"])?;
    for c in curves {
        for &(t, kl) in &c.points {
            w.write_record([c.sampler.name().to_string(), t.to_string(), kl.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `sampler,initial_kl,final_kl`, one row per curve.
pub fn write_kl_summary(path: &Path, curves: &[KlCurve]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sampler", "initial_kl", "final_kl"])?;
    for c in curves {
        w.write_record([c.sampler.name().to_string(), c.initial().to_string(), c.final_kl().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `run,covered,ratio`: one row per repetition labelled `run`, then
/// `run_mean` and `run_sd` rows.
pub fn write_coverage(path: &Path, reports: &[(&str, &ModeCoverageReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["run", "covered", "ratio"])?;
    for (name, r) in reports {
        for &(c, ratio) in &r.per_rep {
            w.write_record([name.to_string(), c.to_string(), ratio.to_string()])?;
        }
        w.write_record([format!("{name}_mean"), r.covered_mean.to_string(), r.ratio_mean.to_string()])?;
        w.write_record([format!("{name}_sd"), r.covered_sd.to_string(), r.ratio_sd.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `metric,value` rows.
pub fn write_metrics(path: &Path, rows: &[(&str, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "value"])?;
    for (k, v) in rows {
        w.write_record([k.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
