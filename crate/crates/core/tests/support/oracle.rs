//! Brute-force posterior for one individual with fixed population parameters
//! and AR(0) errors. `β` is integrated analytically (Gaussian prior, Gaussian
//! likelihood); `(log γ, log τ)`, `log τ` and optionally `log σ²` are
//! integrated on midpoint grids. Written independently of the sampler.

#![allow(dead_code)]

use bentcable_core::{
    ArCoefs, BentCableCoefs, ChainSettings, ChainState, IndividualParams, LongitudinalDataset, Pinned, Population,
    PopulationParams, Profile, Sampler, TransitionCoefs, Variant,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub struct OneIndividual {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub mu_beta: [f64; 3],
    /// Diagonal of `Σ_β`.
    pub var_beta: [f64; 3],
    pub mu_alpha: [f64; 2],
    /// Diagonal of `Σ_α`.
    pub var_alpha: [f64; 2],
    pub mu_tau_a: f64,
    pub var_tau_a: f64,
    pub omega: f64,
    /// Fixed innovation variance, or the `G(d0/2, d1/2)` prior on its inverse.
    pub sigma2: Sigma2,
}

#[derive(Clone, Copy)]
pub enum Sigma2 {
    Fixed(f64),
    Gamma { d0: f64, d1: f64 },
}

#[derive(Debug, Default, Clone, Copy)]
pub struct Moments {
    pub prob_gradual: f64,
    pub beta: [f64; 3],
    pub gamma: f64,
    pub tau: f64,
    pub sigma2: f64,
}

fn q(t: f64, gamma: f64, tau: f64) -> f64 {
    if t <= tau - gamma {
        0.0
    } else if t >= tau + gamma {
        t - tau
    } else {
        (t - tau + gamma).powi(2) / (4.0 * gamma)
    }
}

fn ln_normal(x: f64, m: f64, v: f64) -> f64 {
    -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v)
}

/// Cholesky of a 3x3 SPD matrix (row-major), lower factor.
fn chol3(a: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut l = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    l
}

fn solve3(l: &[[f64; 3]; 3], b: [f64; 3]) -> [f64; 3] {
    let mut z = [0.0; 3];
    for i in 0..3 {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        x[i] = (z[i] - (i + 1..3).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    x
}

impl OneIndividual {
    /// `log p(y | γ, τ, σ²)` with `β` integrated out, and `E[β | y, γ, τ, σ²]`.
    fn collapsed(&self, gamma: f64, tau: f64, s2: f64) -> (f64, [f64; 3]) {
        let n = self.times.len();
        // precision P = Σ⁻¹ + X'X/σ², rhs = Σ⁻¹μ + X'y/σ²
        let mut p = [[0.0; 3]; 3];
        let mut rhs = [0.0; 3];
        let mut yy = 0.0;
        for i in 0..3 {
            p[i][i] = 1.0 / self.var_beta[i];
            rhs[i] = self.mu_beta[i] / self.var_beta[i];
        }
        for (&t, &y) in self.times.iter().zip(&self.y) {
            let x = [1.0, t, q(t, gamma, tau)];
            for i in 0..3 {
                for j in 0..3 {
                    p[i][j] += x[i] * x[j] / s2;
                }
                rhs[i] += x[i] * y / s2;
            }
            yy += y * y / s2;
        }
        let l = chol3(&p);
        let mean = solve3(&l, rhs);
        let ln_det_p: f64 = 2.0 * (0..3).map(|i| l[i][i].ln()).sum::<f64>();
        let ln_det_sigma: f64 = self.var_beta.iter().map(|v| v.ln()).sum();
        let prior_quad: f64 = (0..3).map(|i| self.mu_beta[i].powi(2) / self.var_beta[i]).sum();
        let post_quad: f64 = (0..3).map(|i| rhs[i] * mean[i]).sum();
        let ll = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI * s2).ln() + ln_det_sigma + ln_det_p)
            - 0.5 * (yy + prior_quad - post_quad);
        (ll, mean)
    }

    fn sigma2_grid(&self, points: usize) -> Vec<(f64, f64)> {
        match self.sigma2 {
            Sigma2::Fixed(s2) => vec![(s2, 0.0)],
            Sigma2::Gamma { d0, d1 } => {
                // log density of w = log σ² when σ⁻² ~ G(d0/2, d1/2)
                let (a, b) = (d0 / 2.0, d1 / 2.0);
                let (lo, hi) = (-8.0f64, 4.0f64);
                let h = (hi - lo) / points as f64;
                (0..points)
                    .map(|k| {
                        let w = lo + (k as f64 + 0.5) * h;
                        let lam = (-w).exp();
                        let lp = a * b.ln() - libm::lgamma(a) + (a - 1.0) * lam.ln() - b * lam + lam.ln();
                        (w.exp(), lp + h.ln())
                    })
                    .collect()
            }
        }
    }

    /// Posterior moments by grid integration; `points` per coordinate.
    pub fn moments(&self, points: usize) -> Moments {
        let s2_grid = self.sigma2_grid(points);
        let span = 7.0;
        let grid = |m: f64, v: f64| -> Vec<(f64, f64)> {
            let sd = v.sqrt();
            let h = 2.0 * span * sd / points as f64;
            (0..points)
                .map(|k| {
                    let x = m - span * sd + (k as f64 + 0.5) * h;
                    (x, ln_normal(x, m, v) + h.ln())
                })
                .collect()
        };
        let ug = grid(self.mu_alpha[0], self.var_alpha[0]);
        let vg = grid(self.mu_alpha[1], self.var_alpha[1]);
        let ka = grid(self.mu_tau_a, self.var_tau_a);

        // terms (log weight, β mean, γ, τ, σ²), accumulated with a running max
        let mut terms: Vec<(f64, bool, [f64; 3], f64, f64, f64)> = Vec::new();
        for &(s2, ls) in &s2_grid {
            for &(u, lu) in &ug {
                for &(v, lv) in &vg {
                    let (gamma, tau) = (u.exp(), v.exp());
                    let (ll, b) = self.collapsed(gamma, tau, s2);
                    terms.push((self.omega.ln() + lu + lv + ls + ll, true, b, gamma, tau, s2));
                }
            }
            for &(k, lk) in &ka {
                let tau = k.exp();
                let (ll, b) = self.collapsed(0.0, tau, s2);
                terms.push(((1.0 - self.omega).ln() + lk + ls + ll, false, b, 0.0, tau, s2));
            }
        }
        let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut m = Moments::default();
        for (lw, g, b, gamma, tau, s2) in terms {
            let w = (lw - top).exp();
            z += w;
            if g {
                m.prob_gradual += w;
            }
            for (acc, bi) in m.beta.iter_mut().zip(b) {
                *acc += w * bi;
            }
            m.gamma += w * gamma;
            m.tau += w * tau;
            m.sigma2 += w * s2;
        }
        m.prob_gradual /= z;
        for i in 0..3 {
            m.beta[i] /= z;
        }
        m.gamma /= z;
        m.tau /= z;
        m.sigma2 /= z;
        m
    }

    pub fn dataset(&self) -> LongitudinalDataset {
        LongitudinalDataset::single(Profile::new("only", self.times.clone(), self.y.clone()).unwrap()).unwrap()
    }

    fn population(&self) -> PopulationParams {
        let [a, b, c] = self.var_beta;
        PopulationParams {
            mu_beta: self.mu_beta,
            sigma_beta: [a, 0.0, 0.0, 0.0, b, 0.0, 0.0, 0.0, c],
            mu_alpha: self.mu_alpha,
            sigma_alpha: [self.var_alpha[0], 0.0, 0.0, self.var_alpha[1]],
            mu_tau_a: self.mu_tau_a,
            sigma2_tau_a: self.var_tau_a,
            omega: self.omega,
            ar: ArCoefs::zeros(0),
        }
    }

    /// Chain moments with the population (and the variance, when fixed) pinned.
    pub fn chain_moments(&self, hyper: &bentcable_core::Hyperparameters, iters: usize, seed: u64) -> Moments {
        let (s2, pinned) = match self.sigma2 {
            Sigma2::Fixed(s2) => (s2, Pinned::population_and_variances()),
            Sigma2::Gamma { d0, d1 } => (d1 / d0, Pinned { sigma2: false, ..Pinned::population_and_variances() }),
        };
        let start = IndividualParams {
            beta: BentCableCoefs::new(self.mu_beta[0], self.mu_beta[1], self.mu_beta[2]),
            trans: TransitionCoefs::new(self.mu_alpha[0].exp(), self.mu_alpha[1].exp()),
            population: Population::Gradual,
            sigma2: s2,
        };
        let state = ChainState { individuals: vec![start], population: self.population() };
        let settings = ChainSettings { variant: Variant::Flexible, pinned, ..ChainSettings::new(iters, iters / 10, seed) };
        let chain = Sampler::with_state(&self.dataset(), hyper, &settings, state).unwrap().run().unwrap();
        let n = chain.len() as f64;
        let mut m = Moments::default();
        for d in chain.individual(0) {
            if d.population == Population::Gradual {
                m.prob_gradual += 1.0 / n;
            }
            let b = d.beta.as_array();
            for (acc, bi) in m.beta.iter_mut().zip(b) {
                *acc += bi / n;
            }
            m.gamma += d.trans.gamma / n;
            m.tau += d.trans.tau / n;
            m.sigma2 += d.sigma2 / n;
        }
        m
    }
}

/// A 20-point profile with true bend half-width `gamma` (0 for abrupt), and
/// fixed population values with median gradual half-width `prior_gamma`.
pub fn one_profile_case(gamma: f64, prior_gamma: f64, sigma2: Sigma2) -> OneIndividual {
    let times: Vec<f64> = (0..20).map(|j| j as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let noise = Normal::new(0.0, 0.3).unwrap();
    let y = times.iter().map(|&t| 5.0 + 0.5 * t - 1.0 * q(t, gamma, 10.0) + noise.sample(&mut rng)).collect();
    OneIndividual {
        times,
        y,
        mu_beta: [5.0, 0.5, -1.0],
        var_beta: [1.0, 0.01, 0.01],
        mu_alpha: [prior_gamma.ln(), 10.0f64.ln()],
        var_alpha: [0.2, 0.01],
        mu_tau_a: 10.0f64.ln(),
        var_tau_a: 0.01,
        omega: 0.5,
        sigma2,
    }
}

/// Hyperparameters for [`one_profile_case`]; only `d0`, `d1` matter when the
/// population is pinned.
pub fn one_profile_hyper(sigma2: Sigma2) -> bentcable_core::Hyperparameters {
    let mut h = bentcable_core::default_hyperparameters(0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]).unwrap();
    if let Sigma2::Gamma { d0, d1 } = sigma2 {
        h.d0 = d0;
        h.d1 = d1;
    }
    h
}
