//! Markov-chain revision of generator proposals.

mod config;
mod driver;
mod revise;
mod target;

pub use config::{step_size, SamplerConfig, SamplerKind, StepSchedule};
pub use driver::{conditional_revise, interpolate_latent, par_chunks, sample_model, sample_target, ClassChoice, CHAIN_CHUNK};
pub use revise::{advance, coopnet_revise, inner_ld_refresh, revise, revise_step, ChainState, DIVERGENCE_LIMIT};
pub use target::{LatentTarget, NrfTarget};
