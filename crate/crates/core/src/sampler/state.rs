use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;

use crate::linalg;
use crate::model::{ArCoefs, IndividualParams, Population};

/// Level-2/3 state. Matrices are flat row-major covariances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopulationParams {
    pub mu_beta: [f64; 3],
    pub sigma_beta: [f64; 9],
    /// `(μ_γ, μ_τ)`: mean of `(log γ, log τ)` in the gradual population.
    pub mu_alpha: [f64; 2],
    pub sigma_alpha: [f64; 4],
    /// Mean of `log τ` in the abrupt population.
    pub mu_tau_a: f64,
    pub sigma2_tau_a: f64,
    pub omega: f64,
    pub ar: ArCoefs,
}

impl PopulationParams {
    pub fn is_valid(&self) -> bool {
        linalg::is_spd(&self.sigma_beta, 3)
            && linalg::is_spd(&self.sigma_alpha, 2)
            && self.sigma2_tau_a > 0.0
            && (0.0..=1.0).contains(&self.omega)
    }
}

/// Which mixture the chain fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Variant {
    /// Two populations with mixing weight `ω`.
    #[default]
    Flexible,
    /// Gradual transitions only (`ω ≡ 1`).
    GOnly,
    /// Abrupt transitions only (`ω ≡ 0`).
    AOnly,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Flexible => "flexible",
            Variant::GOnly => "g-only",
            Variant::AOnly => "a-only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flexible" => Some(Variant::Flexible),
            "g-only" => Some(Variant::GOnly),
            "a-only" => Some(Variant::AOnly),
            _ => None,
        }
    }

    /// Population forced by the variant, if any.
    pub fn forced(self) -> Option<Population> {
        match self {
            Variant::Flexible => None,
            Variant::GOnly => Some(Population::Gradual),
            Variant::AOnly => Some(Population::Abrupt),
        }
    }
}

/// Blocks held at their initial values. Everything is sampled by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct Pinned {
    pub beta: bool,
    pub alpha: bool,
    pub indicator: bool,
    pub sigma2: bool,
    pub mu_beta: bool,
    pub sigma_beta: bool,
    pub mu_alpha: bool,
    pub sigma_alpha: bool,
    pub mu_tau_a: bool,
    pub sigma2_tau_a: bool,
    pub omega: bool,
    pub phi: bool,
}

impl Pinned {
    pub fn all() -> Self {
        Pinned {
            beta: true,
            alpha: true,
            indicator: true,
            sigma2: true,
            mu_beta: true,
            sigma_beta: true,
            mu_alpha: true,
            sigma_alpha: true,
            mu_tau_a: true,
            sigma2_tau_a: true,
            omega: true,
            phi: true,
        }
    }

    /// Everything above Level 1 plus the innovation variances.
    pub fn population_and_variances() -> Self {
        Pinned { beta: false, alpha: false, indicator: false, ..Pinned::all() }
    }
}

/// Complete sampler state.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainState {
    pub individuals: Vec<IndividualParams>,
    pub population: PopulationParams,
}

impl ChainState {
    pub fn count(&self, pop: Population) -> usize {
        self.individuals.iter().filter(|i| i.population == pop).count()
    }

    pub fn is_consistent(&self) -> bool {
        self.individuals.iter().all(IndividualParams::is_consistent)
    }
}

/// `(log γ, log τ)` of a gradual individual.
pub fn log_alpha(ind: &IndividualParams) -> [f64; 2] {
    [ind.trans.gamma.ln(), ind.trans.tau.ln()]
}
