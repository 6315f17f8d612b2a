//! Bayesian inference for the flexible mixture longitudinal bent-cable model.
//!
//! Each individual's trend is a bent cable (linear incoming phase, quadratic
//! bend of half-width `γ` centred at `τ`, linear outgoing phase) drawn from one
//! of two latent populations: gradual (`γ > 0`, lognormal `(γ, τ)`) or abrupt
//! (`γ = 0`, lognormal `τ`). Within-individual errors follow a common AR(p)
//! process. This crate holds the model, the Metropolis-within-Gibbs sampler,
//! DIC selection, posterior summaries and the simulation harness. It is
//! `no_std` with `alloc`; file formats and the command line live elsewhere.

#![no_std]
// `!(x > 0.0)` style checks deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod dist;
pub mod error;
pub mod linalg;
pub mod model;
pub mod priors;
pub mod sampler;
pub mod selection;
pub mod simulate;
pub mod summarize;

pub use data::{reduce_for_dic, LongitudinalDataset, ObservationRow, Profile, ReducedView};
pub use error::{Error, Result};
pub use model::{
    ar_transform, bent_cable, critical_time_point, level1_loglik, q_basis, ArCoefs, BentCableCoefs, IndividualParams,
    Population, TransitionCoefs,
};
pub use priors::{default_hyperparameters, elicit_scale_matrices, Hyperparameters};
pub use sampler::{run_chain, ChainOutput, ChainSettings, ChainState, Pinned, PopulationParams, Sampler, Variant};
pub use selection::{compare_models, compute_dic, DicReport};
pub use simulate::{builtin_scenario, generate, ScenarioSpec};

/// Non-fatal conditions surfaced to the caller.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum Warning {
    /// Time grids are unequally spaced while an AR(p>0) error model is fitted.
    UnequalSpacing { p: usize },
    /// Too few usable profiles to elicit a scale matrix; identity used.
    ElicitationFallback { matrix: &'static str, usable: usize },
}

impl core::fmt::Display for Warning {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Warning::UnequalSpacing { p } => {
                write!(f, "time grids are unequally spaced but AR({p}) errors assume equal spacing")
            }
            Warning::ElicitationFallback { matrix, usable } => {
                write!(f, "only {usable} usable profiles for eliciting {matrix}; using the identity")
            }
        }
    }
}

/// Weakly informative hyperparameters elicited from `ds` (see
/// [`priors::elicited_hyperparameters`]), plus any warnings about the data or
/// the elicitation.
pub fn hyperparameters_for(ds: &LongitudinalDataset, p: usize) -> Result<(Hyperparameters, alloc::vec::Vec<Warning>)> {
    let elicited = elicit_scale_matrices(ds);
    let hyper = priors::elicited_hyperparameters(p, &elicited)?;
    let mut warnings = elicited.warnings;
    if p > 0 && ds.has_unequal_spacing() {
        warnings.push(Warning::UnequalSpacing { p });
    }
    Ok((hyper, warnings))
}
