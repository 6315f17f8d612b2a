//! Successive-conditional simulation on a tiny model (m = 3, n = 8, p = 0).
//!
//! Alternating "simulate data given parameters" with one sweep leaves the
//! prior invariant exactly when every update targets the joint posterior.
//! Marginal means along that chain are compared with independent prior
//! draws.

use bentcable_core::model::{bent_cable, ArCoefs, BentCableCoefs, IndividualParams, Population, TransitionCoefs};
use bentcable_core::{ChainSettings, ChainState, Hyperparameters, LongitudinalDataset, PopulationParams, Profile, Sampler};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

pub const M: usize = 3;
pub const N: usize = 8;

pub fn hyper() -> Hyperparameters {
    Hyperparameters {
        h1: [2.0, 0.5, -0.5],
        h1_cov: [0.25, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0, 0.01],
        h2: [0.0, 3.5f64.ln()],
        h2_cov: [0.05, 0.0, 0.0, 0.05],
        h3: vec![],
        h3_cov: vec![],
        a0: 3.5f64.ln(),
        a1: 0.05,
        nu1: 6.0,
        scale_beta: [0.5, 0.0, 0.0, 0.0, 0.01, 0.0, 0.0, 0.0, 0.01],
        nu2: 6.0,
        scale_alpha: [0.05, 0.01, 0.01, 0.05],
        b0: 10.0,
        b1: 0.5,
        c0: 2.0,
        c1: 2.0,
        d0: 10.0,
        d1: 10.0,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gamma(rng: &mut ChaCha8Rng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

fn chol(a: &[f64], n: usize) -> Vec<f64> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = a[i * n + j] - (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum::<f64>();
            l[i * n + j] = if i == j { s.sqrt() } else { s / l[j * n + j] };
        }
    }
    l
}

fn mvn(rng: &mut ChaCha8Rng, mean: &[f64], cov: &[f64]) -> Vec<f64> {
    let n = mean.len();
    let l = chol(cov, n);
    let z: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    (0..n).map(|i| mean[i] + (0..=i).map(|k| l[i * n + k] * z[k]).sum::<f64>()).collect()
}

fn inverse(a: &[f64], n: usize) -> Vec<f64> {
    // Gauss-Jordan; fine for 2x2 and 3x3 SPD inputs
    let mut m = a.to_vec();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    for c in 0..n {
        let p = m[c * n + c];
        for k in 0..n {
            m[c * n + k] /= p;
            inv[c * n + k] /= p;
        }
        for r in 0..n {
            if r != c {
                let f = m[r * n + c];
                for k in 0..n {
                    m[r * n + k] -= f * m[c * n + k];
                    inv[r * n + k] -= f * inv[c * n + k];
                }
            }
        }
    }
    inv
}

/// Covariance whose inverse is `W(ν, (ν A)⁻¹)` with integer `ν`: the
/// precision is a sum of `ν` outer products of `N(0, (ν A)⁻¹)` vectors.
fn inverse_wishart_cov(rng: &mut ChaCha8Rng, nu: usize, scale: &[f64], n: usize) -> Vec<f64> {
    let s: Vec<f64> = scale.iter().map(|v| v * nu as f64).collect();
    let s_inv = inverse(&s, n);
    let mut prec = vec![0.0; n * n];
    for _ in 0..nu {
        let z = mvn(rng, &vec![0.0; n], &s_inv);
        for i in 0..n {
            for j in 0..n {
                prec[i * n + j] += z[i] * z[j];
            }
        }
    }
    inverse(&prec, n)
}

pub fn prior_draw(rng: &mut ChaCha8Rng, h: &Hyperparameters) -> ChainState {
    let mu_beta = mvn(rng, &h.h1, &h.h1_cov);
    let sigma_beta = inverse_wishart_cov(rng, h.nu1 as usize, &h.scale_beta, 3);
    let mu_alpha = mvn(rng, &h.h2, &h.h2_cov);
    let sigma_alpha = inverse_wishart_cov(rng, h.nu2 as usize, &h.scale_alpha, 2);
    let mu_tau_a = h.a0 + h.a1.sqrt() * normal(rng);
    let sigma2_tau_a = 1.0 / gamma(rng, h.b0 / 2.0, h.b1 / 2.0);
    let omega = Beta::new(h.c0, h.c1).unwrap().sample(rng);
    let individuals = (0..M)
        .map(|_| {
            let gradual = rng.random::<f64>() < omega;
            let b = mvn(rng, &mu_beta, &sigma_beta);
            let (population, trans) = if gradual {
                let xi = mvn(rng, &mu_alpha, &sigma_alpha);
                (Population::Gradual, TransitionCoefs::new(xi[0].exp(), xi[1].exp()))
            } else {
                let kappa = mu_tau_a + sigma2_tau_a.sqrt() * normal(rng);
                (Population::Abrupt, TransitionCoefs::abrupt(kappa.exp()))
            };
            let sigma2 = 1.0 / gamma(rng, h.d0 / 2.0, h.d1 / 2.0);
            IndividualParams { beta: BentCableCoefs::new(b[0], b[1], b[2]), trans, population, sigma2 }
        })
        .collect();
    ChainState {
        individuals,
        population: PopulationParams {
            mu_beta: mu_beta.try_into().unwrap(),
            sigma_beta: sigma_beta.try_into().unwrap(),
            mu_alpha: mu_alpha.try_into().unwrap(),
            sigma_alpha: sigma_alpha.try_into().unwrap(),
            mu_tau_a,
            sigma2_tau_a,
            omega,
            ar: ArCoefs::zeros(0),
        },
    }
}

pub fn times() -> Vec<f64> {
    (0..N).map(|j| j as f64).collect()
}

pub fn simulate_responses(rng: &mut ChaCha8Rng, state: &ChainState) -> Vec<Vec<f64>> {
    state
        .individuals
        .iter()
        .map(|ind| times().iter().map(|&t| bent_cable(t, ind.beta, ind.trans) + ind.sigma2.sqrt() * normal(rng)).collect())
        .collect()
}

pub const K: usize = 14;
pub const NAMES: [&str; K] = [
    "mu_beta0",
    "mu_beta1",
    "mu_beta2",
    "omega",
    "sigma2_1",
    "sigma2_2",
    "sigma2_3",
    "sigma2_tau_a",
    "m_gradual",
    "mu_gamma",
    "mu_tau",
    "mu_tau_a",
    "log_Sigma_alpha11",
    "mean_log_tau",
];

pub fn stats(s: &ChainState) -> [f64; K] {
    let p = &s.population;
    let i = &s.individuals;
    let m_g = i.iter().filter(|x| x.population == Population::Gradual).count() as f64;
    let log_tau = i.iter().map(|x| x.trans.tau.ln()).sum::<f64>() / M as f64;
    [
        p.mu_beta[0],
        p.mu_beta[1],
        p.mu_beta[2],
        p.omega,
        i[0].sigma2,
        i[1].sigma2,
        i[2].sigma2,
        p.sigma2_tau_a,
        m_g,
        p.mu_alpha[0],
        p.mu_alpha[1],
        p.mu_tau_a,
        p.sigma_alpha[0].ln(),
        log_tau,
    ]
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn batch_means(sampler: &mut Sampler, sweeps: usize, batches: usize, mut between: impl FnMut(&mut Sampler)) -> Vec<[f64; K]> {
    let per = sweeps / batches;
    let mut bm = vec![[0.0; K]; batches];
    for b in bm.iter_mut() {
        for _ in 0..per {
            between(sampler);
            sampler.sweep().unwrap();
            let v = stats(sampler.state());
            for k in 0..K {
                b[k] += v[k] / per as f64;
            }
        }
    }
    bm
}

pub fn mean_and_se(bm: &[[f64; K]], k: usize) -> (f64, f64) {
    let n = bm.len() as f64;
    let m = bm.iter().map(|b| b[k]).sum::<f64>() / n;
    let var = bm.iter().map(|b| (b[k] - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

pub fn dataset(y: &[Vec<f64>]) -> LongitudinalDataset {
    let profiles = (0..M).map(|i| Profile::new(format!("s{i}"), times(), y[i].clone()).unwrap()).collect();
    LongitudinalDataset::new(profiles).unwrap()
}

/// One compared statistic: prior Monte Carlo mean, successive-conditional
/// mean, z score and two-sided p-value.
#[derive(Debug)]
pub struct GewekeRow {
    pub name: &'static str,
    pub prior: f64,
    pub chain: f64,
    pub z: f64,
    pub p: f64,
}

/// `sweeps` independent prior draws against `sweeps` successive-conditional
/// sweeps, with the chain's standard error from 20 batch means.
pub fn successive_conditional(sweeps: usize, seed: u64) -> Vec<GewekeRow> {
    let h = hyper();
    h.validate().unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sums = [0.0; K];
    let mut sq = [0.0; K];
    for _ in 0..sweeps {
        let v = stats(&prior_draw(&mut rng, &h));
        for k in 0..K {
            sums[k] += v[k];
            sq[k] += v[k] * v[k];
        }
    }
    let n = sweeps as f64;
    let mc_mean: Vec<f64> = sums.iter().map(|s| s / n).collect();
    let mc_var: Vec<f64> = (0..K).map(|k| sq[k] / n - mc_mean[k] * mc_mean[k]).collect();

    let start = prior_draw(&mut rng, &h);
    let ds = dataset(&simulate_responses(&mut rng, &start));
    let settings = ChainSettings { adapt_interval: 0, ..ChainSettings::new(sweeps + 1, 0, 7) };
    let mut sampler = Sampler::with_state(&ds, &h, &settings, start).unwrap();
    let bm = batch_means(&mut sampler, sweeps, 20, |s| {
        let y = simulate_responses(&mut rng, s.state());
        s.replace_responses(&y).unwrap();
    });

    (0..K)
        .map(|k| {
            let (chain, se) = mean_and_se(&bm, k);
            let z = (chain - mc_mean[k]) / (mc_var[k] / n + se * se).sqrt();
            GewekeRow { name: NAMES[k], prior: mc_mean[k], chain, z, p: normal_two_sided_p(z) }
        })
        .collect()
}
