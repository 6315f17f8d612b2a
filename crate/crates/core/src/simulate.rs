//! Synthetic data from the full generative model, the built-in simulation
//! scenarios, and replicate studies of coverage and bias.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{LongitudinalDataset, Profile};
use crate::dist;
use crate::error::{Error, Result};
use crate::linalg;
use crate::priors::Hyperparameters;
use crate::model::{bent_cable, ArCoefs, BentCableCoefs, IndividualParams, Population, TransitionCoefs};
use crate::sampler::{run_chain, ChainOutput, ChainSettings, PopulationParams, Variant};
use crate::summarize::{summarize_individuals, summarize_population, Summary};

/// Steps of AR burn-in discarded before the observed series.
pub const AR_BURNIN: usize = 500;

/// Scenario names accepted by [`builtin_scenario`].
pub const SCENARIOS: [&str; 4] = ["S1a", "S1b", "S2", "S3"];

/// Truth and design of a simulation. `(μ_γ, μ_τ)` and `μ_τA` are means of
/// `log γ`, `log τ` and `log τ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioSpec {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub omega: f64,
    pub mu_beta: [f64; 3],
    pub sigma_beta: [f64; 9],
    pub mu_alpha: [f64; 2],
    pub sigma_alpha: [f64; 4],
    pub mu_tau_a: f64,
    pub sigma2_tau_a: f64,
    pub phi: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub seed: u64,
}

/// Innovation variances of the 20 simulated individuals.
pub const SCENARIO_SIGMA2: [f64; 20] =
    [0.34, 1.12, 1.75, 0.42, 0.74, 2.06, 1.16, 1.28, 0.16, 0.77, 0.04, 0.03, 0.91, 1.96, 0.32, 2.02, 0.89, 0.90, 0.82, 2.89];

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n < crate::data::MIN_OBSERVATIONS {
            return Err(Error::Settings(format!("need m ≥ 1 and n ≥ {}", crate::data::MIN_OBSERVATIONS)));
        }
        if self.sigma2.len() != self.m {
            return Err(Error::Settings(format!("{} innovation variances for m = {}", self.sigma2.len(), self.m)));
        }
        if self.sigma2.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::Settings("innovation variances must be nonnegative".into()));
        }
        if !(0.0..=1.0).contains(&self.omega) {
            return Err(Error::Settings("omega must lie in [0, 1]".into()));
        }
        if !linalg::is_spd(&self.sigma_beta, 3) {
            return Err(Error::NotSpd("Sigma_beta"));
        }
        if !linalg::is_spd(&self.sigma_alpha, 2) {
            return Err(Error::NotSpd("Sigma_alpha"));
        }
        if !(self.sigma2_tau_a > 0.0) {
            return Err(Error::Settings("sigma2_tau_a must be positive".into()));
        }
        if !ArCoefs::new(self.phi.clone()).is_stationary() {
            return Err(Error::Settings("generation requires stationary AR coefficients".into()));
        }
        Ok(())
    }

    /// Population truth in sampler form.
    pub fn population(&self) -> PopulationParams {
        PopulationParams {
            mu_beta: self.mu_beta,
            sigma_beta: self.sigma_beta,
            mu_alpha: self.mu_alpha,
            sigma_alpha: self.sigma_alpha,
            mu_tau_a: self.mu_tau_a,
            sigma2_tau_a: self.sigma2_tau_a,
            omega: self.omega,
            ar: ArCoefs::new(self.phi.clone()),
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioSpec { seed, ..self.clone() }
    }
}

/// A built-in scenario: 20 individuals, 150 unit-spaced occasions.
pub fn builtin_scenario(name: &str) -> Result<ScenarioSpec> {
    let (omega, phi) = match name {
        "S1a" => (0.90, vec![0.70]),
        "S1b" => (0.95, vec![0.70]),
        "S2" => (0.50, vec![0.70]),
        "S3" => (0.50, vec![0.80, -0.10]),
        _ => return Err(Error::UnknownScenario(name.to_string())),
    };
    Ok(ScenarioSpec {
        name: name.to_string(),
        m: 20,
        n: 150,
        omega,
        mu_beta: [244.0, 0.5, -0.75],
        sigma_beta: [125.0, -1.0, 0.5, -1.0, 0.03, -0.01, 0.5, -0.01, 0.03],
        mu_alpha: [3.0, 4.0],
        sigma_alpha: [0.020, 0.005, 0.005, 0.030],
        mu_tau_a: 4.5,
        sigma2_tau_a: 0.05,
        phi,
        sigma2: SCENARIO_SIGMA2.to_vec(),
        seed: 0,
    })
}

/// Simulated individuals and the population they came from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truth {
    pub population: PopulationParams,
    pub individuals: Vec<IndividualParams>,
}

/// Stationary AR(p) path of length `n` with innovation variance `sigma2`,
/// started from zero and run for [`AR_BURNIN`] steps first.
pub fn ar_path<R: Rng + ?Sized>(rng: &mut R, phi: &[f64], sigma2: f64, n: usize) -> Vec<f64> {
    let sd = sigma2.sqrt();
    let p = phi.len();
    let mut e = vec![0.0; p + AR_BURNIN + n];
    for j in p..e.len() {
        let mut v = sd * dist::std_normal(rng);
        for (k, f) in phi.iter().enumerate() {
            v += f * e[j - k - 1];
        }
        e[j] = v;
    }
    e.split_off(p + AR_BURNIN)
}

/// Draw a dataset and its truth. Every individual consumes the same random
/// numbers whatever its population, so specs differing only in `ω` share all
/// other draws under a common seed.
pub fn generate(spec: &ScenarioSpec) -> Result<(LongitudinalDataset, Truth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let lb = linalg::cholesky(&spec.sigma_beta, 3).ok_or(Error::NotSpd("Sigma_beta"))?;
    let la = linalg::cholesky(&spec.sigma_alpha, 2).ok_or(Error::NotSpd("Sigma_alpha"))?;
    let times: Vec<f64> = (0..spec.n).map(|j| j as f64).collect();
    let mut profiles = Vec::with_capacity(spec.m);
    let mut individuals = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let gradual = rng.random::<f64>() < spec.omega;
        let beta = BentCableCoefs::from_slice(&dist::mvn_from_cov_chol(&mut rng, &spec.mu_beta, &lb));
        let xi = dist::mvn_from_cov_chol(&mut rng, &spec.mu_alpha, &la);
        let kappa = dist::normal(&mut rng, spec.mu_tau_a, spec.sigma2_tau_a);
        let (population, trans) = if gradual {
            (Population::Gradual, TransitionCoefs::new(xi[0].exp(), xi[1].exp()))
        } else {
            (Population::Abrupt, TransitionCoefs::abrupt(kappa.exp()))
        };
        let eps = ar_path(&mut rng, &spec.phi, spec.sigma2[i], spec.n);
        let y = times.iter().zip(&eps).map(|(&t, e)| bent_cable(t, beta, trans) + e).collect();
        profiles.push(Profile::new(format!("{}", i + 1), times.clone(), y)?);
        individuals.push(IndividualParams { beta, trans, population, sigma2: spec.sigma2[i] });
    }
    let ds = if spec.m == 1 {
        LongitudinalDataset::single(profiles.pop().expect("one profile"))?
    } else {
        LongitudinalDataset::new(profiles)?
    };
    Ok((ds, Truth { population: spec.population(), individuals }))
}

/// How each replicate is fitted.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FitConfig {
    pub p: usize,
    pub variant: Variant,
    pub settings: ChainSettings,
    /// Interval level for coverage.
    pub level: f64,
}

/// One parameter's estimate in one replicate.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Estimate {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicateResult {
    pub replicate: usize,
    pub data_seed: u64,
    /// `Err` text when the fit failed.
    pub outcome: core::result::Result<Vec<Estimate>, String>,
}

/// Truth values of the population regression coefficients, mixing weight,
/// AR coefficients (when the fit has the same order), variance components
/// and innovation variances, by summary name.
pub fn truth_table(spec: &ScenarioSpec, fit_p: usize) -> Vec<(String, f64)> {
    let mut t: Vec<(String, f64)> = Vec::new();
    for (name, v) in [
        ("mu_beta0", spec.mu_beta[0]),
        ("mu_beta1", spec.mu_beta[1]),
        ("mu_beta2", spec.mu_beta[2]),
        ("mu_gamma", spec.mu_alpha[0]),
        ("mu_tau", spec.mu_alpha[1]),
        ("mu_tau_a", spec.mu_tau_a),
        ("omega", spec.omega),
        ("Sigma_beta11", spec.sigma_beta[0]),
        ("Sigma_beta22", spec.sigma_beta[4]),
        ("Sigma_beta33", spec.sigma_beta[8]),
        ("Sigma_beta12", spec.sigma_beta[1]),
        ("Sigma_beta13", spec.sigma_beta[2]),
        ("Sigma_beta23", spec.sigma_beta[5]),
        ("Sigma_alpha11", spec.sigma_alpha[0]),
        ("Sigma_alpha22", spec.sigma_alpha[3]),
        ("Sigma_alpha12", spec.sigma_alpha[1]),
        ("sigma2_tau_a", spec.sigma2_tau_a),
    ] {
        t.push((name.to_string(), v));
    }
    if fit_p == spec.phi.len() {
        for (k, v) in spec.phi.iter().enumerate() {
            t.push((format!("phi{}", k + 1), *v));
        }
    }
    for (i, v) in spec.sigma2.iter().enumerate() {
        t.push((format!("sigma2_{}", i + 1), *v));
    }
    t
}

/// Estimates of every truth-table entry the chain reports.
pub fn estimates(spec: &ScenarioSpec, chain: &ChainOutput, level: f64) -> Result<Vec<Estimate>> {
    let pop = summarize_population(chain, level)?;
    let inds = summarize_individuals(chain, level)?;
    let lookup = |name: &str| -> Option<Summary> {
        if let Some(i) = name.strip_prefix("sigma2_").and_then(|k| k.parse::<usize>().ok()) {
            inds.get(i - 1).map(|r| r.sigma2)
        } else {
            pop.get(name).copied()
        }
    };
    Ok(truth_table(spec, chain.p)
        .into_iter()
        .filter_map(|(name, truth)| {
            lookup(&name).map(|s| Estimate {
                covered: s.covers(truth),
                truth,
                mean: s.mean,
                median: s.median,
                lower: s.lower,
                upper: s.upper,
                name,
            })
        })
        .collect())
}

/// Hyperparameters for fitting data generated from `spec`.
///
/// As [`crate::hyperparameters_for`], except that the prior estimates of the
/// covariance scales are the scenario's own `Σ_β`, `Σ_α` and `σ²_τA`, which
/// a simulation study knows.
pub fn study_hyperparameters(spec: &ScenarioSpec, ds: &LongitudinalDataset, p: usize) -> Result<Hyperparameters> {
    let (mut h, _) = crate::hyperparameters_for(ds, p)?;
    h.scale_beta = spec.sigma_beta;
    h.scale_alpha = spec.sigma_alpha;
    h.b0 = 1.0;
    h.b1 = spec.sigma2_tau_a;
    h.validate()?;
    Ok(h)
}

/// Generate replicate `r` (data seed `spec.seed + r`) and fit it with
/// [`study_hyperparameters`]. The chain seed is the data seed on RNG stream
/// `1 + settings.stream`.
pub fn fit_replicate(spec: &ScenarioSpec, fit: &FitConfig, r: usize) -> Result<(Vec<Estimate>, ChainOutput)> {
    let data_seed = spec.seed.wrapping_add(r as u64);
    let (ds, _) = generate(&spec.with_seed(data_seed))?;
    let hyper = study_hyperparameters(spec, &ds, fit.p)?;
    let settings =
        ChainSettings { seed: data_seed, stream: 1 + fit.settings.stream, variant: fit.variant, ..fit.settings.clone() };
    let chain = run_chain(&ds, &hyper, &settings)?;
    Ok((estimates(spec, &chain, fit.level)?, chain))
}

pub fn run_replicate(spec: &ScenarioSpec, fit: &FitConfig, r: usize) -> ReplicateResult {
    ReplicateResult {
        replicate: r,
        data_seed: spec.seed.wrapping_add(r as u64),
        outcome: fit_replicate(spec, fit, r).map(|x| x.0).map_err(|e| e.to_string()),
    }
}

/// Averages over successful replicates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyRow {
    pub name: String,
    pub truth: f64,
    pub avg_mean: f64,
    pub avg_median: f64,
    pub coverage: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StudyReport {
    pub scenario: String,
    pub p: usize,
    pub variant: Variant,
    pub requested: usize,
    pub failed: usize,
    pub failures: Vec<(usize, String)>,
    pub rows: Vec<StudyRow>,
}

impl StudyReport {
    pub fn row(&self, name: &str) -> Option<&StudyRow> {
        self.rows.iter().find(|r| r.name == name)
    }
}

pub fn aggregate(spec: &ScenarioSpec, fit: &FitConfig, results: &[ReplicateResult]) -> StudyReport {
    let mut rows: Vec<StudyRow> = Vec::new();
    let mut failures = Vec::new();
    for res in results {
        match &res.outcome {
            Ok(est) => {
                for e in est {
                    let row = match rows.iter_mut().position(|r| r.name == e.name) {
                        Some(k) => &mut rows[k],
                        None => {
                            rows.push(StudyRow {
                                name: e.name.clone(),
                                truth: e.truth,
                                avg_mean: 0.0,
                                avg_median: 0.0,
                                coverage: 0.0,
                                replicates: 0,
                            });
                            rows.last_mut().expect("just pushed")
                        }
                    };
                    row.avg_mean += e.mean;
                    row.avg_median += e.median;
                    row.coverage += e.covered as u8 as f64;
                    row.replicates += 1;
                }
            }
            Err(msg) => failures.push((res.replicate, msg.clone())),
        }
    }
    for r in &mut rows {
        let k = r.replicates as f64;
        r.avg_mean /= k;
        r.avg_median /= k;
        r.coverage /= k;
    }
    StudyReport {
        scenario: spec.name.clone(),
        p: fit.p,
        variant: fit.variant,
        requested: results.len(),
        failed: failures.len(),
        failures,
        rows,
    }
}

/// Sequential replicate study over `r = 1..=replicates`.
pub fn replicate_study(spec: &ScenarioSpec, fit: &FitConfig, replicates: usize) -> Result<StudyReport> {
    if replicates == 0 {
        return Err(Error::Settings("need at least one replicate".into()));
    }
    let results: Vec<ReplicateResult> = (1..=replicates).map(|r| run_replicate(spec, fit, r)).collect();
    Ok(aggregate(spec, fit, &results))
}
