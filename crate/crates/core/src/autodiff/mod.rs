//! Reverse-mode differentiation for feed-forward dense networks.
//!
//! Sampling differentiates with respect to network inputs as well as
//! parameters, so [`backward`] returns both.

mod graph;
mod network;
mod numeric;
mod params;

pub use graph::{backward, forward, input_grad, Graph, Mode};
pub use network::{Activation, Layer, NetworkSpec, BN_EPS, BN_MOMENTUM};
pub use numeric::{finite_diff, logsumexp, softmax};
pub use params::ParamSet;
