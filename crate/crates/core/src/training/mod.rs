//! Joint training of the potential and the auxiliary generator.

mod adam;
mod config;
mod losses;
mod train;
mod update;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use config::TrainConfig;
pub use losses::{confidence_loss, potential_control_loss, supervised_log_likelihood};
pub use train::{train, DirSink, MemorySink, MetricRow, TrainData, TrainSink, TrainSummary};
pub use update::{draw_model_samples, phi_ascent, semi_update, theta_ascent, unsup_update, Alphas, Optimizers, StepDiagnostics};
