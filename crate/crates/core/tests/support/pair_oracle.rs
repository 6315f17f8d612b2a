//! Brute-force posterior for two individuals with free `β_i`, `α_i`, `I_i`,
//! `σ_i²`, `μ_β` and `ω`, and every other population parameter fixed, AR(0).
//! `β_i` and `μ_β` are integrated analytically; each individual's
//! `(I, log γ, log τ, log σ²)` lives on a midpoint grid and `ω` is integrated
//! out through the beta-binomial law of the indicators.

#![allow(dead_code)]

use bentcable_core::{
    ArCoefs, BentCableCoefs, ChainSettings, ChainState, Hyperparameters, IndividualParams, LongitudinalDataset, Pinned,
    Population, PopulationParams, Profile, Sampler, TransitionCoefs, Variant,
};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

pub struct PairModel {
    pub times: Vec<f64>,
    pub y: [Vec<f64>; 2],
    pub sigma_beta: Matrix3<f64>,
    pub mu_alpha: [f64; 2],
    pub var_alpha: [f64; 2],
    pub mu_tau_a: f64,
    pub var_tau_a: f64,
    pub hyper: Hyperparameters,
}

#[derive(Debug, Default, Clone, Copy)]
pub struct PairMoments {
    pub mu_beta: [f64; 3],
    pub sigma2: [f64; 2],
    pub omega: f64,
}

/// One grid state of one individual, reduced to its Gaussian factor in `μ_β`:
/// `p(y_i | μ_β, state) = exp(c - μ'Pμ/2 + μ'r)`.
struct Factor {
    gradual: bool,
    log_prior: f64,
    sigma2: f64,
    prec: Matrix3<f64>,
    lin: Vector3<f64>,
    c: f64,
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

fn midpoints(m: f64, sd: f64, span: f64, points: usize) -> Vec<(f64, f64)> {
    let h = 2.0 * span * sd / points as f64;
    (0..points).map(|k| (m - span * sd + (k as f64 + 0.5) * h, h.ln())).collect()
}

impl PairModel {
    fn factor(&self, i: usize, gamma: f64, tau: f64, s2: f64, gradual: bool, log_prior: f64) -> Factor {
        let n = self.times.len();
        let x = DMatrix::from_fn(n, 3, |j, k| match k {
            0 => 1.0,
            1 => self.times[j],
            _ => q(self.times[j], gamma, tau),
        });
        let sb = DMatrix::from_fn(3, 3, |a, b| self.sigma_beta[(a, b)]);
        let v = DMatrix::identity(n, n) * s2 + &x * sb * x.transpose();
        let chol = v.clone().cholesky().expect("SPD");
        let vinv_x = chol.solve(&x);
        let y = DVector::from_column_slice(&self.y[i]);
        let vinv_y = chol.solve(&y);
        let ln_det: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let p = x.transpose() * vinv_x;
        let r = x.transpose() * &vinv_y;
        Factor {
            gradual,
            log_prior,
            sigma2: s2,
            prec: Matrix3::from_fn(|a, b| p[(a, b)]),
            lin: Vector3::new(r[0], r[1], r[2]),
            c: -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + ln_det + y.dot(&vinv_y)),
        }
    }

    fn factors(&self, i: usize, points: usize, sigma2_points: usize) -> Vec<Factor> {
        let (a, b) = (self.hyper.d0 / 2.0, self.hyper.d1 / 2.0);
        // log σ² grid around the prior median, with the G(a, b) law of σ⁻²
        let centre = (b / a).ln();
        let s2_grid: Vec<(f64, f64)> = midpoints(centre, 1.0, 4.0, sigma2_points)
            .into_iter()
            .map(|(w, lh)| {
                let lam = (-w).exp();
                (w.exp(), a * b.ln() - libm::lgamma(a) + a * lam.ln() - b * lam + lh)
            })
            .collect();
        let span = 6.0;
        let ug = midpoints(self.mu_alpha[0], self.var_alpha[0].sqrt(), span, points);
        let vg = midpoints(self.mu_alpha[1], self.var_alpha[1].sqrt(), span, points);
        let kg = midpoints(self.mu_tau_a, self.var_tau_a.sqrt(), span, points);
        let mut out = Vec::new();
        for &(s2, ls) in &s2_grid {
            for &(u, lu) in &ug {
                for &(v, lv) in &vg {
                    let lp = ls + ln_normal(u, self.mu_alpha[0], self.var_alpha[0]) + lu
                        + ln_normal(v, self.mu_alpha[1], self.var_alpha[1]) + lv;
                    out.push(self.factor(i, u.exp(), v.exp(), s2, true, lp));
                }
            }
            for &(k, lk) in &kg {
                let lp = ls + ln_normal(k, self.mu_tau_a, self.var_tau_a) + lk;
                out.push(self.factor(i, 0.0, k.exp(), s2, false, lp));
            }
        }
        out
    }

    pub fn moments(&self, points: usize, sigma2_points: usize) -> PairMoments {
        let f0 = self.factors(0, points, sigma2_points);
        let f1 = self.factors(1, points, sigma2_points);
        let h = &self.hyper;
        let h1_cov = Matrix3::from_row_slice(&h.h1_cov);
        let h1_prec = h1_cov.try_inverse().expect("SPD");
        let h1 = Vector3::from_column_slice(&h.h1);
        let prior_lin = h1_prec * h1;
        let prior_c = -0.5 * (h1_cov.determinant().ln() + h1.dot(&prior_lin));
        let ln_beta = |a: f64, b: f64| libm::lgamma(a) + libm::lgamma(b) - libm::lgamma(a + b);

        let mut terms: Vec<(f64, Vector3<f64>, f64, f64, f64)> = Vec::with_capacity(f0.len() * f1.len());
        for a in &f0 {
            for b in &f1 {
                let q = h1_prec + a.prec + b.prec;
                let chol = q.cholesky().expect("SPD");
                let lin = prior_lin + a.lin + b.lin;
                let mean = chol.solve(&lin);
                let ln_det_q: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
                let m_g = a.gradual as usize + b.gradual as usize;
                let log_w = a.log_prior + b.log_prior + a.c + b.c + prior_c - 0.5 * ln_det_q + 0.5 * lin.dot(&mean)
                    + ln_beta(m_g as f64 + h.c0, (2 - m_g) as f64 + h.c1)
                    - ln_beta(h.c0, h.c1);
                let omega = (m_g as f64 + h.c0) / (2.0 + h.c0 + h.c1);
                terms.push((log_w, mean, a.sigma2, b.sigma2, omega));
            }
        }
        let top = terms.iter().map(|t| t.0).fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut m = PairMoments::default();
        for (lw, mean, s0, s1, om) in terms {
            let w = (lw - top).exp();
            z += w;
            for k in 0..3 {
                m.mu_beta[k] += w * mean[k];
            }
            m.sigma2[0] += w * s0;
            m.sigma2[1] += w * s1;
            m.omega += w * om;
        }
        for k in 0..3 {
            m.mu_beta[k] /= z;
        }
        m.sigma2[0] /= z;
        m.sigma2[1] /= z;
        m.omega /= z;
        m
    }

    pub fn dataset(&self) -> LongitudinalDataset {
        let profiles = (0..2).map(|i| Profile::new(format!("p{i}"), self.times.clone(), self.y[i].clone()).unwrap()).collect();
        LongitudinalDataset::new(profiles).unwrap()
    }

    pub fn chain_moments(&self, iters: usize, seed: u64) -> PairMoments {
        let s2 = self.hyper.d1 / self.hyper.d0;
        let start = IndividualParams {
            beta: BentCableCoefs::from_slice(&self.hyper.h1),
            trans: TransitionCoefs::new(self.mu_alpha[0].exp(), self.mu_alpha[1].exp()),
            population: Population::Gradual,
            sigma2: s2,
        };
        let mut sigma_beta = [0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                sigma_beta[a * 3 + b] = self.sigma_beta[(a, b)];
            }
        }
        let population = PopulationParams {
            mu_beta: self.hyper.h1,
            sigma_beta,
            mu_alpha: self.mu_alpha,
            sigma_alpha: [self.var_alpha[0], 0.0, 0.0, self.var_alpha[1]],
            mu_tau_a: self.mu_tau_a,
            sigma2_tau_a: self.var_tau_a,
            omega: 0.5,
            ar: ArCoefs::zeros(0),
        };
        let state = ChainState { individuals: vec![start; 2], population };
        let pinned = Pinned { sigma2: false, mu_beta: false, omega: false, ..Pinned::population_and_variances() };
        let settings = ChainSettings { variant: Variant::Flexible, pinned, ..ChainSettings::new(iters, iters / 10, seed) };
        let chain = Sampler::with_state(&self.dataset(), &self.hyper, &settings, state).unwrap().run().unwrap();
        let n = chain.len() as f64;
        let mut m = PairMoments::default();
        for (pop, inds) in chain.population.iter().zip(&chain.individuals) {
            for k in 0..3 {
                m.mu_beta[k] += pop.mu_beta[k] / n;
            }
            m.sigma2[0] += inds[0].sigma2 / n;
            m.sigma2[1] += inds[1].sigma2 / n;
            m.omega += pop.omega / n;
        }
        m
    }
}

/// Two six-point profiles, one gradual and one abrupt, with informative
/// fixed population values.
pub fn pair_case() -> PairModel {
    let times: Vec<f64> = (0..6).map(|j| j as f64).collect();
    let curve = |b: [f64; 3], g: f64, tau: f64, noise: &[f64]| -> Vec<f64> {
        times.iter().zip(noise).map(|(&t, e)| b[0] + b[1] * t + b[2] * q(t, g, tau) + e).collect()
    };
    let y = [
        curve([5.2, 1.1, -2.1], 1.0, 2.5, &[0.21, -0.35, 0.12, 0.30, -0.18, 0.05]),
        curve([4.7, 0.9, -1.8], 0.0, 2.4, &[-0.10, 0.25, -0.31, 0.08, 0.27, -0.22]),
    ];
    let mut hyper = bentcable_core::default_hyperparameters(0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], [1.0, 0.0, 0.0, 1.0]).unwrap();
    hyper.h1 = [5.0, 1.0, -2.0];
    hyper.h1_cov = [1.0, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.25];
    hyper.c0 = 2.0;
    hyper.c1 = 2.0;
    hyper.d0 = 6.0;
    hyper.d1 = 0.36;
    PairModel {
        times,
        y,
        sigma_beta: Matrix3::from_diagonal(&Vector3::new(0.25, 0.04, 0.04)),
        mu_alpha: [0.0, 2.5f64.ln()],
        var_alpha: [0.1, 0.01],
        mu_tau_a: 2.5f64.ln(),
        var_tau_a: 0.01,
        hyper,
    }
}
