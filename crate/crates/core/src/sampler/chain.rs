use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::design::IndividualDesign;
use super::state::{log_alpha, ChainState, Pinned, PopulationParams, Variant};
use super::updates::{self, AlphaProposal, PriorCache};
use crate::data::LongitudinalDataset;
use crate::dist::LN_2PI;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{ArCoefs, BentCableCoefs, IndividualParams, Population, TransitionCoefs};
use crate::priors::{grid_fit, Hyperparameters, GRADUAL_THRESHOLD};

/// Target acceptance rate of the adaptive `α` random walk.
pub const TARGET_ACCEPTANCE: f64 = 0.3;
/// Fraction of iterations with a Cholesky failure that aborts the chain.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainSettings {
    pub iters: usize,
    pub burnin: usize,
    pub thin: usize,
    pub seed: u64,
    /// RNG stream; distinct chains sharing a seed use distinct streams.
    pub stream: u64,
    /// Adaptation window for the `α` proposals during burn-in; 0 disables it.
    pub adapt_interval: usize,
    pub variant: Variant,
    pub pinned: Pinned,
}

impl Default for ChainSettings {
    fn default() -> Self {
        ChainSettings {
            iters: 20_000,
            burnin: 5_000,
            thin: 1,
            seed: 0,
            stream: 0,
            adapt_interval: 100,
            variant: Variant::Flexible,
            pinned: Pinned::default(),
        }
    }
}

impl ChainSettings {
    pub fn new(iters: usize, burnin: usize, seed: u64) -> Self {
        ChainSettings { iters, burnin, seed, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iters <= self.burnin {
            return Err(Error::Settings(format!("iters ({}) must exceed burnin ({})", self.iters, self.burnin)));
        }
        if self.thin == 0 {
            return Err(Error::Settings("thin must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of retained draws, `floor((iters - burnin) / thin)`.
    pub fn retained(&self) -> usize {
        (self.iters - self.burnin) / self.thin
    }
}

/// Retained draws and diagnostics of one chain (or several merged chains).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChainOutput {
    pub settings: ChainSettings,
    pub p: usize,
    pub ids: Vec<String>,
    pub population: Vec<PopulationParams>,
    /// `individuals[s][i]`: draw `s` of individual `i`.
    pub individuals: Vec<Vec<IndividualParams>>,
    /// Level-1 conditional deviance at each retained draw.
    pub deviance: Vec<f64>,
    /// Post-burn-in acceptance rate of the `α` random walk, per individual.
    pub alpha_acceptance: Vec<f64>,
    /// Accepted population switches over the whole run, per individual.
    pub indicator_flips: Vec<usize>,
    /// Post-burn-in `φ` draws and how many of them were stationary.
    pub phi_draws: usize,
    pub stationary_draws: usize,
    /// Iterations in which some update kept its old value after a failed
    /// Cholesky factorization.
    pub cholesky_failures: usize,
}

impl ChainOutput {
    pub fn len(&self) -> usize {
        self.population.len()
    }

    pub fn is_empty(&self) -> bool {
        self.population.is_empty()
    }

    /// Fraction of post-burn-in `φ` draws that are stationary (1 when `p = 0`).
    pub fn stationarity_proportion(&self) -> f64 {
        if self.phi_draws == 0 {
            1.0
        } else {
            self.stationary_draws as f64 / self.phi_draws as f64
        }
    }

    pub fn mean_alpha_acceptance(&self) -> f64 {
        self.alpha_acceptance.iter().sum::<f64>() / self.alpha_acceptance.len().max(1) as f64
    }

    /// Draws of one individual across the chain.
    pub fn individual(&self, i: usize) -> impl Iterator<Item = &IndividualParams> + '_ {
        self.individuals.iter().map(move |d| &d[i])
    }

    /// Pool several chains fitted to the same data into one output. Rates are
    /// weighted by draw counts; settings are those of the first chain.
    pub fn merge(chains: Vec<ChainOutput>) -> Result<ChainOutput> {
        let mut it = chains.into_iter();
        let mut out = it.next().ok_or(Error::EmptyChain)?;
        let mut weight = 1.0;
        for c in it {
            if c.p != out.p || c.ids != out.ids || c.settings.variant != out.settings.variant {
                return Err(Error::Settings("cannot merge chains of different models or data".into()));
            }
            for (a, b) in out.alpha_acceptance.iter_mut().zip(&c.alpha_acceptance) {
                *a = (*a * weight + b) / (weight + 1.0);
            }
            weight += 1.0;
            for (a, b) in out.indicator_flips.iter_mut().zip(&c.indicator_flips) {
                *a += b;
            }
            out.population.extend(c.population);
            out.individuals.extend(c.individuals);
            out.deviance.extend(c.deviance);
            out.phi_draws += c.phi_draws;
            out.stationary_draws += c.stationary_draws;
            out.cholesky_failures += c.cholesky_failures;
        }
        Ok(out)
    }
}

/// Robbins–Monro state of one individual's `α` proposal.
#[derive(Debug, Clone)]
struct Adaptation {
    log_scale: f64,
    gradual_shape: [f64; 4],
    abrupt_shape: f64,
    window_accepted: usize,
    window_tried: usize,
    rounds: usize,
    gradual_history: Vec<[f64; 2]>,
    abrupt_history: Vec<f64>,
}

impl Adaptation {
    fn new() -> Self {
        Adaptation {
            log_scale: 0.0,
            gradual_shape: [0.1, 0.0, 0.0, 0.03],
            abrupt_shape: 0.03,
            window_accepted: 0,
            window_tried: 0,
            rounds: 0,
            gradual_history: Vec::new(),
            abrupt_history: Vec::new(),
        }
    }

    fn proposal(&self) -> AlphaProposal {
        let s = self.log_scale.exp();
        let g = self.gradual_shape;
        AlphaProposal { gradual_chol: [s * g[0], 0.0, s * g[2], s * g[3]], abrupt_sd: s * self.abrupt_shape }
    }

    fn adapt(&mut self) {
        if self.window_tried > 0 {
            self.rounds += 1;
            let rate = self.window_accepted as f64 / self.window_tried as f64;
            self.log_scale += (rate - TARGET_ACCEPTANCE) / (self.rounds as f64).sqrt();
            self.log_scale = self.log_scale.clamp(-12.0, 6.0);
        }
        self.window_accepted = 0;
        self.window_tried = 0;
    }

    /// Replace the proposal shapes by the burn-in covariance seen so far.
    fn reshape(&mut self) {
        let mut reshaped = false;
        if self.gradual_history.len() >= 50 {
            let rows: Vec<Vec<f64>> = self.gradual_history.iter().map(|x| x.to_vec()).collect();
            if let Some(mut cov) = linalg::sample_covariance(&rows, 2) {
                cov[0] += 1e-10;
                cov[3] += 1e-10;
                if let Some(l) = linalg::cholesky(&cov, 2) {
                    self.gradual_shape = l.try_into().expect("2x2");
                    reshaped = true;
                }
            }
        }
        if self.abrupt_history.len() >= 50 {
            let n = self.abrupt_history.len() as f64;
            let mean = self.abrupt_history.iter().sum::<f64>() / n;
            let var = self.abrupt_history.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            if var > 0.0 {
                self.abrupt_shape = var.sqrt();
                reshaped = true;
            }
        }
        if reshaped {
            self.log_scale = (2.38 / 2.0f64.sqrt()).ln();
            self.rounds = 0;
        }
        self.gradual_history = Vec::new();
        self.abrupt_history = Vec::new();
    }
}

fn to_array<const N: usize>(v: Vec<f64>) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(&v);
    out
}

fn time_range(times: &[f64]) -> f64 {
    times[times.len() - 1] - times[0]
}

/// Deterministic warm start from coarse per-profile grid fits.
///
/// `I_i = 1` when `γ̂_i` exceeds 2% of the profile's time range (or as forced
/// by the variant); population parameters are moments of the individual
/// fits, with prior scales standing in when too few fits are available.
pub fn initial_state(ds: &LongitudinalDataset, hyper: &Hyperparameters, variant: Variant) -> ChainState {
    let mut individuals = Vec::with_capacity(ds.len());
    for profile in ds.profiles() {
        let range = time_range(&profile.times).max(f64::MIN_POSITIVE);
        let t0 = profile.times[0];
        let n = profile.len();
        let (beta, mut trans, sigma2) = match grid_fit(profile) {
            Some(fit) => {
                let var = fit.residual_variance(n);
                let scale = profile.responses.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1.0);
                (fit.beta, fit.trans, var.max(1e-10 * scale * scale))
            }
            None => (
                BentCableCoefs::new(profile.responses[0], 0.0, 0.0),
                TransitionCoefs::new(0.1 * range, t0 + 0.5 * range),
                1e-6,
            ),
        };
        if !(trans.tau > 0.0) {
            trans.tau = (t0 + 0.5 * range).max(range * 0.5).max(1e-3);
        }
        let gradual = match variant.forced() {
            Some(p) => p == Population::Gradual,
            None => trans.gamma > GRADUAL_THRESHOLD * range,
        };
        let (population, trans) = if gradual {
            let gamma = trans.gamma.max(GRADUAL_THRESHOLD * range).max(1e-6);
            (Population::Gradual, TransitionCoefs::new(gamma, trans.tau))
        } else {
            (Population::Abrupt, TransitionCoefs::abrupt(trans.tau))
        };
        individuals.push(IndividualParams { beta, trans, population, sigma2 });
    }

    let betas: Vec<Vec<f64>> = individuals.iter().map(|i| i.beta.as_array().to_vec()).collect();
    let mu_beta = mean_rows::<3>(&betas);
    let sigma_beta = covariance_or(&betas, 3, &hyper.scale_beta);

    let xis: Vec<Vec<f64>> =
        individuals.iter().filter(|i| i.population == Population::Gradual).map(|i| log_alpha(i).to_vec()).collect();
    let kappas: Vec<f64> =
        individuals.iter().filter(|i| i.population == Population::Abrupt).map(|i| i.trans.tau.ln()).collect();
    let all_log_tau: Vec<f64> = individuals.iter().map(|i| i.trans.tau.ln()).collect();
    let mean_log_tau = all_log_tau.iter().sum::<f64>() / all_log_tau.len() as f64;

    let mu_alpha = if xis.is_empty() {
        let ranges: f64 = ds.profiles().iter().map(|p| time_range(&p.times)).sum::<f64>() / ds.len() as f64;
        [(0.1 * ranges).max(1e-6).ln(), mean_log_tau]
    } else {
        mean_rows::<2>(&xis)
    };
    let sigma_alpha = covariance_or(&xis, 2, &hyper.scale_alpha);
    let (mu_tau_a, sigma2_tau_a) = if kappas.is_empty() {
        (mean_log_tau, variance(&all_log_tau).unwrap_or(0.05).max(1e-3))
    } else {
        let m = kappas.iter().sum::<f64>() / kappas.len() as f64;
        (m, variance(&kappas).or_else(|| variance(&all_log_tau)).unwrap_or(0.05).max(1e-3))
    };
    let omega = match variant {
        Variant::Flexible => (xis.len() as f64 / individuals.len() as f64).clamp(0.05, 0.95),
        Variant::GOnly => 1.0,
        Variant::AOnly => 0.0,
    };
    ChainState {
        individuals,
        population: PopulationParams {
            mu_beta,
            sigma_beta,
            mu_alpha,
            sigma_alpha,
            mu_tau_a,
            sigma2_tau_a,
            omega,
            ar: ArCoefs::zeros(hyper.ar_order()),
        },
    }
}

fn mean_rows<const N: usize>(rows: &[Vec<f64>]) -> [f64; N] {
    let mut out = [0.0; N];
    for r in rows {
        for (o, v) in out.iter_mut().zip(r) {
            *o += v / rows.len() as f64;
        }
    }
    out
}

fn variance(v: &[f64]) -> Option<f64> {
    if v.len() < 2 {
        return None;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let s = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (s > 0.0).then_some(s)
}

fn covariance_or<const N: usize>(rows: &[Vec<f64>], n: usize, fallback: &[f64; N]) -> [f64; N] {
    if rows.len() > n + 1 {
        if let Some(cov) = linalg::sample_covariance(rows, n) {
            if linalg::is_spd(&cov, n) {
                return to_array(cov);
            }
        }
    }
    *fallback
}

/// A running Metropolis-within-Gibbs chain.
#[derive(Debug, Clone)]
pub struct Sampler {
    hyper: Hyperparameters,
    prior: PriorCache,
    settings: ChainSettings,
    ids: Vec<String>,
    state: ChainState,
    designs: Vec<IndividualDesign>,
    prec_beta: [f64; 9],
    prec_alpha: [f64; 4],
    sigma_alpha_chol: Vec<f64>,
    adaptation: Vec<Adaptation>,
    rng: ChaCha8Rng,
    iteration: usize,
    accepted: Vec<usize>,
    tried: Vec<usize>,
    flips: Vec<usize>,
    phi_draws: usize,
    stationary_draws: usize,
    failures: usize,
}

impl Sampler {
    /// Start from the deterministic warm start of [`initial_state`].
    pub fn new(ds: &LongitudinalDataset, hyper: &Hyperparameters, settings: &ChainSettings) -> Result<Self> {
        let state = initial_state(ds, hyper, settings.variant);
        Self::with_state(ds, hyper, settings, state)
    }

    /// Start from a given state.
    pub fn with_state(
        ds: &LongitudinalDataset,
        hyper: &Hyperparameters,
        settings: &ChainSettings,
        state: ChainState,
    ) -> Result<Self> {
        settings.validate()?;
        hyper.validate()?;
        let p = hyper.ar_order();
        if state.population.ar.order() != p {
            return Err(Error::Settings(format!(
                "initial φ has order {} but the prior has order {p}",
                state.population.ar.order()
            )));
        }
        if state.individuals.len() != ds.len() {
            return Err(Error::Settings("initial state does not match the number of profiles".into()));
        }
        if ds.min_len() <= p {
            return Err(Error::Setup(format!("every profile needs more than p = {p} observations")));
        }
        if !state.is_consistent() {
            return Err(Error::Domain("initial state has inconsistent indicators or variances".into()));
        }
        if let Some(forced) = settings.variant.forced() {
            if state.individuals.iter().any(|i| i.population != forced) {
                return Err(Error::Settings(format!("initial state violates the {} variant", settings.variant.name())));
            }
        }
        let prior = PriorCache::new(hyper).map_err(Error::NotSpd)?;
        let prec_beta = to_array(linalg::spd_inverse(&state.population.sigma_beta, 3).ok_or(Error::NotSpd("Sigma_beta"))?);
        let prec_alpha =
            to_array(linalg::spd_inverse(&state.population.sigma_alpha, 2).ok_or(Error::NotSpd("Sigma_alpha"))?);
        let sigma_alpha_chol = linalg::cholesky(&state.population.sigma_alpha, 2).ok_or(Error::NotSpd("Sigma_alpha"))?;
        let designs = ds
            .profiles()
            .iter()
            .zip(&state.individuals)
            .map(|(pr, ind)| IndividualDesign::new(pr, &state.population.ar, ind.trans))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(settings.stream);
        let m = ds.len();
        Ok(Sampler {
            hyper: hyper.clone(),
            prior,
            settings: settings.clone(),
            ids: ds.profiles().iter().map(|p| p.id.clone()).collect(),
            state,
            designs,
            prec_beta,
            prec_alpha,
            sigma_alpha_chol,
            adaptation: vec![Adaptation::new(); m],
            rng,
            iteration: 0,
            accepted: vec![0; m],
            tried: vec![0; m],
            flips: vec![0; m],
            phi_draws: 0,
            stationary_draws: 0,
            failures: 0,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// Swap in new responses (same time grids), keeping the parameter state.
    pub fn replace_responses(&mut self, responses: &[Vec<f64>]) -> Result<()> {
        if responses.len() != self.designs.len() {
            return Err(Error::Settings("response set does not match the number of profiles".into()));
        }
        for (d, y) in self.designs.iter_mut().zip(responses) {
            if y.len() != d.times().len() {
                return Err(Error::Settings("response vector length does not match its time grid".into()));
            }
            d.set_responses(y);
        }
        Ok(())
    }

    /// Level-1 conditional deviance at the current state.
    pub fn deviance(&self) -> f64 {
        self.designs
            .iter()
            .zip(&self.state.individuals)
            .map(|(d, ind)| d.n_random() as f64 * (LN_2PI + ind.sigma2.ln()) + d.sse(ind.beta) / ind.sigma2)
            .sum()
    }

    fn in_burnin(&self) -> bool {
        self.iteration < self.settings.burnin
    }

    /// One full sweep in the fixed order: each `β_i`, each `α_i`, each
    /// indicator, each `σ_i⁻²`, then `μ_β`, `Σ_β⁻¹`, `μ_α`, `Σ_α⁻¹`, `μ_τA`,
    /// `σ_τA⁻²`, `ω`, `φ`.
    pub fn sweep(&mut self) -> Result<()> {
        let pin = self.settings.pinned;
        let variant = self.settings.variant;
        let burnin = self.in_burnin();
        let mut failure: Option<&'static str> = None;
        let m = self.state.individuals.len();

        if !pin.beta {
            for i in 0..m {
                let ind = &self.state.individuals[i];
                match updates::draw_beta_i(
                    &self.designs[i],
                    ind.sigma2,
                    &self.state.population.mu_beta,
                    &self.prec_beta,
                    &mut self.rng,
                ) {
                    Ok(b) => self.state.individuals[i].beta = b,
                    Err(e) => failure = Some(e),
                }
            }
        }

        if !pin.alpha {
            for i in 0..m {
                let proposal = self.adaptation[i].proposal();
                let ind = self.state.individuals[i];
                let (trans, accepted) = updates::metropolis_alpha_i(
                    &mut self.designs[i],
                    &ind,
                    &self.state.population,
                    &self.prec_alpha,
                    &proposal,
                    &mut self.rng,
                );
                self.state.individuals[i].trans = trans;
                let a = &mut self.adaptation[i];
                if burnin {
                    a.window_tried += 1;
                    a.window_accepted += accepted as usize;
                    match ind.population {
                        Population::Gradual => a.gradual_history.push(log_alpha(&self.state.individuals[i])),
                        Population::Abrupt => a.abrupt_history.push(trans.tau.ln()),
                    }
                } else {
                    self.tried[i] += 1;
                    self.accepted[i] += accepted as usize;
                }
            }
        }

        if !pin.indicator && variant.forced().is_none() {
            let refresh = variant == Variant::Flexible && !pin.mu_tau_a && !pin.sigma2_tau_a;
            for i in 0..m {
                let ind = self.state.individuals[i];
                if refresh {
                    let others = updates::OnsetStats::abrupt_except(&self.state.individuals, Some(i));
                    let out = updates::update_indicator_joint_i(
                        &mut self.designs[i],
                        &ind,
                        &self.state.population,
                        &self.sigma_alpha_chol,
                        &others,
                        &self.hyper,
                        &mut self.rng,
                    );
                    let slot = &mut self.state.individuals[i];
                    slot.population = out.population;
                    slot.trans = out.trans;
                    self.state.population.mu_tau_a = out.mu_tau_a;
                    self.state.population.sigma2_tau_a = out.sigma2_tau_a;
                    self.flips[i] += out.flipped as usize;
                    continue;
                }
                let (population, trans, flipped) = updates::update_indicator_i(
                    &mut self.designs[i],
                    &ind,
                    &self.state.population,
                    &self.sigma_alpha_chol,
                    &mut self.rng,
                );
                let slot = &mut self.state.individuals[i];
                slot.population = population;
                slot.trans = trans;
                self.flips[i] += flipped as usize;
            }
        }

        if !pin.sigma2 {
            for i in 0..m {
                let ind = &self.state.individuals[i];
                let sse = self.designs[i].sse(ind.beta);
                let prec = updates::draw_precision_i(sse, self.designs[i].n_random(), self.hyper.d0, self.hyper.d1, &mut self.rng);
                if prec > 0.0 && prec.is_finite() {
                    self.state.individuals[i].sigma2 = 1.0 / prec;
                }
            }
        }

        let inds = &self.state.individuals;
        let pop = &mut self.state.population;
        if !pin.mu_beta {
            match updates::draw_mu_beta(inds, &self.prec_beta, &self.prior, &mut self.rng) {
                Ok(v) => pop.mu_beta = v,
                Err(e) => failure = Some(e),
            }
        }
        if !pin.sigma_beta {
            match updates::draw_prec_beta(inds, &pop.mu_beta, &self.hyper, &mut self.rng)
                .and_then(|w| linalg::spd_inverse(&w, 3).map(|c| (w, c)).ok_or("Sigma_beta"))
            {
                Ok((w, c)) => {
                    self.prec_beta = w;
                    pop.sigma_beta = to_array(c);
                }
                Err(e) => failure = Some(e),
            }
        }
        if variant != Variant::AOnly {
            if !pin.mu_alpha {
                match updates::draw_mu_alpha(inds, &self.prec_alpha, &self.prior, &mut self.rng) {
                    Ok(v) => pop.mu_alpha = v,
                    Err(e) => failure = Some(e),
                }
            }
            if !pin.sigma_alpha {
                let drawn = updates::draw_prec_alpha(inds, &pop.mu_alpha, &self.hyper, &mut self.rng).and_then(|w| {
                    let c = linalg::spd_inverse(&w, 2).ok_or("Sigma_alpha")?;
                    let l = linalg::cholesky(&c, 2).ok_or("Sigma_alpha")?;
                    Ok((w, c, l))
                });
                match drawn {
                    Ok((w, c, l)) => {
                        self.prec_alpha = w;
                        pop.sigma_alpha = to_array(c);
                        self.sigma_alpha_chol = l;
                    }
                    Err(e) => failure = Some(e),
                }
            }
        }
        if variant != Variant::GOnly {
            if !pin.mu_tau_a {
                pop.mu_tau_a = updates::draw_mu_tau_a(inds, pop.sigma2_tau_a, &self.hyper, &mut self.rng);
            }
            if !pin.sigma2_tau_a {
                let prec = updates::draw_prec_tau_a(inds, pop.mu_tau_a, &self.hyper, &mut self.rng);
                if prec > 0.0 && prec.is_finite() {
                    pop.sigma2_tau_a = 1.0 / prec;
                }
            }
        }
        if !pin.omega && variant == Variant::Flexible {
            pop.omega = updates::draw_omega(inds, &self.hyper, &mut self.rng);
        }
        if !pin.phi && pop.ar.order() > 0 {
            match updates::draw_phi(&self.designs, inds, &self.prior, &mut self.rng) {
                Ok((ar, stationary)) => {
                    for d in &mut self.designs {
                        d.refresh_ar(&ar);
                    }
                    pop.ar = ar;
                    if !burnin {
                        self.phi_draws += 1;
                        self.stationary_draws += stationary as usize;
                    }
                }
                Err(e) => failure = Some(e),
            }
        }

        self.iteration += 1;
        if burnin && self.settings.adapt_interval > 0 {
            if self.iteration % self.settings.adapt_interval == 0 {
                for a in &mut self.adaptation {
                    a.adapt();
                }
            }
            if self.iteration == self.settings.burnin / 2 && self.settings.burnin >= 4 * self.settings.adapt_interval {
                for a in &mut self.adaptation {
                    a.reshape();
                }
            }
        }
        if !burnin || self.iteration == self.settings.burnin {
            for a in &mut self.adaptation {
                a.gradual_history = Vec::new();
                a.abrupt_history = Vec::new();
            }
        }

        if let Some(what) = failure {
            self.failures += 1;
            if self.failures as f64 > MAX_FAILURE_RATE * self.settings.iters as f64 {
                return Err(Error::SamplerAbort {
                    iteration: self.iteration,
                    detail: format!("{} Cholesky failures, last in `{what}`", self.failures),
                });
            }
        }
        Ok(())
    }

    /// Run the remaining iterations and collect the retained draws.
    pub fn run(mut self) -> Result<ChainOutput> {
        let retained = self.settings.retained();
        let mut population = Vec::with_capacity(retained);
        let mut individuals = Vec::with_capacity(retained);
        let mut deviance = Vec::with_capacity(retained);
        while self.iteration < self.settings.iters {
            self.sweep()?;
            let k = self.iteration;
            if k > self.settings.burnin && (k - self.settings.burnin) % self.settings.thin == 0 {
                population.push(self.state.population.clone());
                individuals.push(self.state.individuals.clone());
                deviance.push(self.deviance());
            }
        }
        let alpha_acceptance =
            self.accepted.iter().zip(&self.tried).map(|(&a, &t)| if t == 0 { 0.0 } else { a as f64 / t as f64 }).collect();
        Ok(ChainOutput {
            p: self.hyper.ar_order(),
            ids: self.ids,
            settings: self.settings,
            population,
            individuals,
            deviance,
            alpha_acceptance,
            indicator_flips: self.flips,
            phi_draws: self.phi_draws,
            stationary_draws: self.stationary_draws,
            cholesky_failures: self.failures,
        })
    }
}

/// Run one chain from the default warm start.
pub fn run_chain(ds: &LongitudinalDataset, hyper: &Hyperparameters, settings: &ChainSettings) -> Result<ChainOutput> {
    Sampler::new(ds, hyper, settings)?.run()
}
