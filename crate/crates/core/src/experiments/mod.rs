//! End-to-end experiment pipelines behind the command-line runner.

mod gmm_ssl;
mod gmm_unsup;
mod nets;
mod sampler_bench;
mod usage;

pub use gmm_ssl::{labeled_draw, potential_grid, run_gmm_ssl, GmmSslConfig, GmmSslReport, GridConfig};
pub use gmm_unsup::{eval_samples, init_models, run_gmm_unsup, CoverageConfig, GmmUnsupConfig, GmmUnsupReport};
pub use nets::MlpConfig;
pub use sampler_bench::{run_sampler_bench, SamplerBenchConfig};
pub use usage::{conditional, generate, interpolate, load_generator, load_potential};
