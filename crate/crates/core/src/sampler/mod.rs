//! Metropolis-within-Gibbs sampler.

mod chain;
mod design;
mod state;
pub mod updates;

pub use chain::{initial_state, run_chain, ChainOutput, ChainSettings, Sampler};
pub use design::IndividualDesign;
pub use state::{log_alpha, ChainState, Pinned, PopulationParams, Variant};
