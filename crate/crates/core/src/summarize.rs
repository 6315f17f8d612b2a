//! Posterior summaries: lognormal medians and SDs, critical time points,
//! correlations, and fitted curves with pointwise credible bands.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{format, vec};

#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::{bent_cable, critical_time_point, BentCableCoefs, Population, TransitionCoefs};
use crate::sampler::{ChainOutput, PopulationParams, Variant};

/// Quantities derived from one population draw. Times are in the units of the
/// input time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DerivedDraw {
    pub m_gamma: f64,
    pub m_tau: f64,
    pub m_tau_a: f64,
    pub s_gamma: f64,
    pub s_tau: f64,
    /// Gradual-population CTP; `None` when the population slope keeps its sign.
    pub ctp_g: Option<f64>,
    pub ctp_a: f64,
    pub outgoing_slope: f64,
    pub sd_beta: [f64; 3],
    /// Correlations of `(β0, β1)`, `(β0, β2)`, `(β1, β2)`.
    pub corr_beta: [f64; 3],
    /// `corr(γ_i, τ_i - γ_i)` in the gradual population.
    pub corr_gamma_onset: f64,
}

fn lognormal_sd(mu: f64, var: f64) -> f64 {
    ((2.0 * mu + var).exp() * var.exp_m1()).sqrt()
}

fn corr(cov: f64, va: f64, vb: f64) -> f64 {
    (cov / (va * vb).sqrt()).clamp(-1.0, 1.0)
}

/// Derived quantities of one draw.
pub fn derive_per_draw(pop: &PopulationParams) -> DerivedDraw {
    let [mu_g, mu_t] = pop.mu_alpha;
    let s = &pop.sigma_alpha;
    let m_gamma = mu_g.exp();
    let m_tau = mu_t.exp();
    let [mu0, mu1, mu2] = pop.mu_beta;
    let ctp_g = critical_time_point(BentCableCoefs::new(mu0, mu1, mu2), TransitionCoefs::new(m_gamma, m_tau));

    let b = &pop.sigma_beta;
    let sd_beta = [b[0].sqrt(), b[4].sqrt(), b[8].sqrt()];
    let corr_beta = [corr(b[1], b[0], b[4]), corr(b[2], b[0], b[8]), corr(b[5], b[4], b[8])];

    // lognormal moments of (γ, τ)
    let var_g = (2.0 * mu_g + s[0]).exp() * s[0].exp_m1();
    let var_t = (2.0 * mu_t + s[3]).exp() * s[3].exp_m1();
    let cov_gt = (mu_g + mu_t + 0.5 * (s[0] + s[3])).exp() * s[1].exp_m1();
    let cov_onset = cov_gt - var_g;
    let var_onset = var_t + var_g - 2.0 * cov_gt;

    DerivedDraw {
        m_gamma,
        m_tau,
        m_tau_a: pop.mu_tau_a.exp(),
        s_gamma: lognormal_sd(mu_g, s[0]),
        s_tau: lognormal_sd(mu_t, s[3]),
        ctp_g,
        ctp_a: pop.mu_tau_a.exp(),
        outgoing_slope: mu1 + mu2,
        sd_beta,
        corr_beta,
        corr_gamma_onset: corr(cov_onset, var_g, var_onset),
    }
}

/// Linear-interpolation sample quantile of sorted data, `q` in `[0, 1]`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean, median and equal-tailed credible interval of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    pub n: usize,
}

impl Summary {
    /// `None` for an empty sample. Non-finite values are dropped.
    pub fn of(values: impl IntoIterator<Item = f64>, level: f64) -> Option<Summary> {
        let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = if v.len() > 1 { (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        let tail = (1.0 - level) / 2.0;
        Some(Summary {
            mean,
            median: quantile_sorted(&v, 0.5),
            sd,
            lower: quantile_sorted(&v, tail),
            upper: quantile_sorted(&v, 1.0 - tail),
            n: v.len(),
        })
    }

    pub fn covers(&self, truth: f64) -> bool {
        self.lower <= truth && truth <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NamedSummary {
    pub name: String,
    #[cfg_attr(feature = "serde", serde(flatten))]
    pub summary: Summary,
}

/// Population-level posterior report.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopulationReport {
    pub variant: Variant,
    pub p: usize,
    pub draws: usize,
    pub level: f64,
    pub parameters: Vec<NamedSummary>,
    /// Fraction of draws with an undefined gradual-population CTP; those draws
    /// are left out of the `ctp_G` summary.
    pub ctp_g_undefined_fraction: f64,
    pub stationarity_proportion: f64,
    pub mean_alpha_acceptance: f64,
}

impl PopulationReport {
    pub fn get(&self, name: &str) -> Option<&Summary> {
        self.parameters.iter().find(|p| p.name == name).map(|p| &p.summary)
    }
}

/// Parameter columns of one population draw, by name, for the given variant
/// and AR order. Parameters fixed by the variant are left out.
pub fn population_columns(pop: &PopulationParams, variant: Variant) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut push = |name: &str, v: f64| out.push((String::from(name), v));
    push("mu_beta0", pop.mu_beta[0]);
    push("mu_beta1", pop.mu_beta[1]);
    push("mu_beta2", pop.mu_beta[2]);
    for (a, b, name) in [(0, 0, "Sigma_beta11"), (1, 1, "Sigma_beta22"), (2, 2, "Sigma_beta33"), (0, 1, "Sigma_beta12"), (0, 2, "Sigma_beta13"), (1, 2, "Sigma_beta23")] {
        push(name, pop.sigma_beta[a * 3 + b]);
    }
    if variant != Variant::AOnly {
        push("mu_gamma", pop.mu_alpha[0]);
        push("mu_tau", pop.mu_alpha[1]);
        push("Sigma_alpha11", pop.sigma_alpha[0]);
        push("Sigma_alpha22", pop.sigma_alpha[3]);
        push("Sigma_alpha12", pop.sigma_alpha[1]);
    }
    if variant != Variant::GOnly {
        push("mu_tau_a", pop.mu_tau_a);
        push("sigma2_tau_a", pop.sigma2_tau_a);
    }
    if variant == Variant::Flexible {
        push("omega", pop.omega);
    }
    for (k, phi) in pop.ar.phi.iter().enumerate() {
        out.push((format!("phi{}", k + 1), *phi));
    }
    out
}

fn derived_columns(d: &DerivedDraw, variant: Variant) -> Vec<(&'static str, f64)> {
    let mut out = vec![
        ("outgoing_slope", d.outgoing_slope),
        ("sd_beta0", d.sd_beta[0]),
        ("sd_beta1", d.sd_beta[1]),
        ("sd_beta2", d.sd_beta[2]),
        ("corr_beta01", d.corr_beta[0]),
        ("corr_beta02", d.corr_beta[1]),
        ("corr_beta12", d.corr_beta[2]),
    ];
    if variant != Variant::AOnly {
        out.extend([
            ("M_gamma", d.m_gamma),
            ("M_tau", d.m_tau),
            ("S_gamma", d.s_gamma),
            ("S_tau", d.s_tau),
            ("M_tau_minus_M_gamma", d.m_tau - d.m_gamma),
            ("M_tau_plus_M_gamma", d.m_tau + d.m_gamma),
            ("corr_gamma_onset", d.corr_gamma_onset),
        ]);
    }
    if variant != Variant::GOnly {
        out.extend([("M_tau_a", d.m_tau_a), ("ctp_A", d.ctp_a)]);
    }
    out
}

/// Posterior means, medians and equal-tailed intervals of every population
/// parameter and derived quantity.
pub fn summarize_population(chain: &ChainOutput, level: f64) -> Result<PopulationReport> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let variant = chain.settings.variant;
    let names: Vec<String> = population_columns(&chain.population[0], variant).into_iter().map(|c| c.0).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(chain.len()); names.len()];
    let derived: Vec<DerivedDraw> = chain.population.iter().map(derive_per_draw).collect();
    for pop in &chain.population {
        for (col, (_, v)) in columns.iter_mut().zip(population_columns(pop, variant)) {
            col.push(v);
        }
    }
    let mut parameters: Vec<NamedSummary> = names
        .into_iter()
        .zip(columns)
        .filter_map(|(name, col)| Summary::of(col, level).map(|summary| NamedSummary { name, summary }))
        .collect();

    let dnames: Vec<&str> = derived_columns(&derived[0], variant).into_iter().map(|c| c.0).collect();
    for (k, name) in dnames.iter().enumerate() {
        if let Some(summary) = Summary::of(derived.iter().map(|d| derived_columns(d, variant)[k].1), level) {
            parameters.push(NamedSummary { name: String::from(*name), summary });
        }
    }
    let mut undefined = 0usize;
    if variant != Variant::AOnly {
        undefined = derived.iter().filter(|d| d.ctp_g.is_none()).count();
        if let Some(summary) = Summary::of(derived.iter().filter_map(|d| d.ctp_g), level) {
            parameters.push(NamedSummary { name: String::from("ctp_G"), summary });
        }
    }
    Ok(PopulationReport {
        variant,
        p: chain.p,
        draws: chain.len(),
        level,
        parameters,
        ctp_g_undefined_fraction: if variant == Variant::AOnly { 0.0 } else { undefined as f64 / chain.len() as f64 },
        stationarity_proportion: chain.stationarity_proportion(),
        mean_alpha_acceptance: chain.mean_alpha_acceptance(),
    })
}

/// Per-individual posterior summary.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndividualReport {
    pub id: String,
    pub prob_gradual: f64,
    pub sigma2: Summary,
    pub beta: [Summary; 3],
    pub tau: Summary,
    /// `γ_i` over the draws in which the individual is gradual.
    pub gamma_given_gradual: Option<Summary>,
    /// Individual CTP over draws where it is defined.
    pub ctp: Option<Summary>,
    pub ctp_undefined_fraction: f64,
    pub alpha_acceptance: f64,
    pub indicator_flips: usize,
}

pub fn summarize_individuals(chain: &ChainOutput, level: f64) -> Result<Vec<IndividualReport>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let n = chain.len() as f64;
    let mut out = Vec::with_capacity(chain.ids.len());
    for (i, id) in chain.ids.iter().enumerate() {
        let draws: Vec<_> = chain.individual(i).copied().collect();
        let s = |f: &dyn Fn(&crate::model::IndividualParams) -> f64| Summary::of(draws.iter().map(f), level).expect("nonempty");
        let ctps: Vec<f64> = draws.iter().filter_map(|d| critical_time_point(d.beta, d.trans)).collect();
        out.push(IndividualReport {
            id: id.clone(),
            prob_gradual: draws.iter().filter(|d| d.population == Population::Gradual).count() as f64 / n,
            sigma2: s(&|d| d.sigma2),
            beta: [s(&|d| d.beta.beta0), s(&|d| d.beta.beta1), s(&|d| d.beta.beta2)],
            tau: s(&|d| d.trans.tau),
            gamma_given_gradual: Summary::of(
                draws.iter().filter(|d| d.population == Population::Gradual).map(|d| d.trans.gamma),
                level,
            ),
            ctp_undefined_fraction: 1.0 - ctps.len() as f64 / n,
            ctp: Summary::of(ctps, level),
            alpha_acceptance: chain.alpha_acceptance.get(i).copied().unwrap_or(0.0),
            indicator_flips: chain.indicator_flips.get(i).copied().unwrap_or(0),
        });
    }
    Ok(out)
}

/// Pointwise posterior mean and equal-tailed band of a curve.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Band {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn band<F: Fn(usize, f64) -> f64>(draws: usize, grid: &[f64], level: f64, f: F) -> Band {
    let tail = (1.0 - level) / 2.0;
    let mut b = Band { times: grid.to_vec(), mean: Vec::new(), lower: Vec::new(), upper: Vec::new() };
    let mut vals = vec![0.0; draws];
    for &t in grid {
        for (s, v) in vals.iter_mut().enumerate() {
            *v = f(s, t);
        }
        let mean = vals.iter().sum::<f64>() / draws as f64;
        vals.sort_by(f64::total_cmp);
        b.mean.push(mean);
        // the band always contains the mean, even for a skewed sample
        b.lower.push(quantile_sorted(&vals, tail).min(mean));
        b.upper.push(quantile_sorted(&vals, 1.0 - tail).max(mean));
    }
    b
}

/// Posterior mean of individual `i`'s bent cable on `grid`, with a pointwise
/// band at `level`. Each draw uses its own `γ_i` (0 in abrupt draws).
pub fn fitted_individual(chain: &ChainOutput, i: usize, grid: &[f64], level: f64) -> Result<Band> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    if i >= chain.ids.len() {
        return Err(Error::Settings(format!("no individual with index {i}")));
    }
    Ok(band(chain.len(), grid, level, |s, t| {
        let d = &chain.individuals[s][i];
        bent_cable(t, d.beta, d.trans)
    }))
}

/// Population curves built from `μ_β` with the lognormal medians: gradual
/// `(M_γ, M_τ)` and abrupt `(0, M_τA)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PopulationCurves {
    pub abrupt: Band,
    pub gradual: Band,
}

pub fn fitted_population(chain: &ChainOutput, grid: &[f64], level: f64) -> Result<PopulationCurves> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let lin = |s: usize| {
        let m = chain.population[s].mu_beta;
        BentCableCoefs::new(m[0], m[1], m[2])
    };
    let gradual = band(chain.len(), grid, level, |s, t| {
        let a = chain.population[s].mu_alpha;
        bent_cable(t, lin(s), TransitionCoefs::new(a[0].exp(), a[1].exp()))
    });
    let abrupt = band(chain.len(), grid, level, |s, t| {
        bent_cable(t, lin(s), TransitionCoefs::abrupt(chain.population[s].mu_tau_a.exp()))
    });
    Ok(PopulationCurves { abrupt, gradual })
}
