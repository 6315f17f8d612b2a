//! Random draws and log densities used by the sampler and the simulator.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::{Beta, ChiSquared, Distribution, Gamma, StandardNormal};

use crate::linalg;

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    mean + var.sqrt() * std_normal(rng)
}

/// Gamma draw with shape/rate parameterization, floored at the smallest
/// positive normal so precisions never collapse to exactly zero.
pub fn gamma_shape_rate<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    let g = Gamma::new(shape, 1.0 / rate).expect("gamma parameters must be positive and finite");
    g.sample(rng).max(f64::MIN_POSITIVE)
}

pub fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b).expect("beta parameters must be positive").sample(rng)
}

/// `N(mean, cov)` given the lower Cholesky factor of `cov`.
pub fn mvn_from_cov_chol<R: Rng + ?Sized>(rng: &mut R, mean: &[f64], chol: &[f64]) -> Vec<f64> {
    let n = mean.len();
    let e: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let le = linalg::lower_mul(chol, n, &e);
    mean.iter().zip(le).map(|(m, d)| m + d).collect()
}

/// `N(P⁻¹ b, P⁻¹)` given the lower Cholesky factor `L` of the precision `P`.
pub fn mvn_canonical<R: Rng + ?Sized>(rng: &mut R, prec_chol: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mean = linalg::chol_solve(prec_chol, n, b);
    let e: Vec<f64> = (0..n).map(|_| std_normal(rng)).collect();
    let dev = linalg::backward_sub_t(prec_chol, n, &e);
    mean.iter().zip(dev).map(|(m, d)| m + d).collect()
}

/// Wishart draw `W(dof, scale)` with mean `dof · scale` (Bartlett
/// decomposition). `scale_chol` is the lower Cholesky factor of `scale`.
pub fn wishart<R: Rng + ?Sized>(rng: &mut R, dof: f64, scale_chol: &[f64], n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let chi = ChiSquared::new(dof - i as f64).expect("wishart dof must exceed order - 1");
        a[i * n + i] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[i * n + j] = std_normal(rng);
        }
    }
    // (L A) is lower triangular; W = (L A)(L A)ᵀ
    let mut la = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            la[i * n + j] = (j..=i).map(|k| scale_chol[i * n + k] * a[k * n + j]).sum();
        }
    }
    linalg::outer_lower(&la, n)
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

/// Log density of the shape/rate gamma law at `x > 0`.
pub fn gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - libm::lgamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log density of `N(mean, cov)` at `x`, given `cov`'s lower Cholesky factor.
pub fn mvn_logpdf_chol(x: &[f64], mean: &[f64], cov_chol: &[f64]) -> f64 {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    let w = linalg::forward_sub(cov_chol, n, &d);
    let q: f64 = w.iter().map(|v| v * v).sum();
    -0.5 * (n as f64 * LN_2PI + linalg::chol_logdet(cov_chol, n) + q)
}

/// Log density of `N(mean, prec⁻¹)` at `x` given the precision matrix and its
/// log determinant.
pub fn mvn_logpdf_prec(x: &[f64], mean: &[f64], prec: &[f64], prec_logdet: f64) -> f64 {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    -0.5 * (n as f64 * LN_2PI - prec_logdet + linalg::quad_form(prec, n, &d))
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}
