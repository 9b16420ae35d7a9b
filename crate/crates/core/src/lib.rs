//! Neural random fields trained against an inclusive-divergence auxiliary
//! generator, with SGLD/SGHMC sample revision.

pub mod anomaly;
pub mod autodiff;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod models;
pub mod rng;
pub mod samplers;
pub mod targets;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use tensor::Tensor;
