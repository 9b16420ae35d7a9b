//! Metrics and reports.

mod benchmark;
mod coverage;
mod metrics;
mod report;

pub use benchmark::{log_checkpoints, sampler_benchmark, KlCurve};
pub use coverage::{coverage_once, mode_coverage, ModeCoverageReport, REALISM_THRESHOLD};
pub use metrics::{prf_at_quantile, roc_auc, Prf};
pub use report::{write_coverage, write_kl_curves, write_kl_summary, write_metrics};
