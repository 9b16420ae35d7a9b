//! Analytic targets and synthetic datasets.

mod csv;
mod gaussian;
mod gmm;

pub use self::csv::{read_points, read_table, write_points, Table};
pub use gaussian::{benchmark_target, kl_gaussians, random_spd, GaussianDist, GaussianJointBenchmark, EMPIRICAL_RIDGE};
pub use gmm::{gmm16_ssl, gmm32, gmm_log_density, gmm_rings, gmm_sample, GmmSample, GmmSpec};
