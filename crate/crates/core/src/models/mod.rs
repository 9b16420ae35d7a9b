//! The potential network `u_θ`, the latent-variable generator `q_φ(x, h)`,
//! and their JSON checkpoint format.

mod checkpoint;
mod generator;
mod potential;

pub use checkpoint::{Checkpoint, ModelKind, ParamRecord};
pub use generator::GeneratorNet;
pub use potential::{LabeledExample, PotentialNet};

pub(crate) use potential::{heads_to_potentials, marginal_seed};
