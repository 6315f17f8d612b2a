//! Small dense linear algebra on flat row-major slices.
//!
//! Every matrix in the model is tiny (3×3 for the linear coefficients, 2×2 for
//! the log-transition coefficients, p×p for the AR coefficients), so these
//! routines favour clarity over blocking. Matrices are `&[f64]` of length
//! `n * n`, row-major.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;

/// Relative jitter added to the diagonal on a failed Cholesky factorization.
pub const JITTER_SCALE: f64 = 1e-10;

/// Lower Cholesky factor `L` with `a = L Lᵀ`, or `None` if `a` is not
/// numerically positive definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    debug_assert_eq!(a.len(), n * n);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Cholesky with the one-shot rescue policy: on failure add
/// `1e-10 * trace(a) * I` and retry once.
pub fn cholesky_jittered(a: &[f64], n: usize) -> Option<Vec<f64>> {
    if let Some(l) = cholesky(a, n) {
        return Some(l);
    }
    let tr: f64 = (0..n).map(|i| a[i * n + i]).sum();
    let eps = JITTER_SCALE * if tr > 0.0 { tr } else { 1.0 };
    let mut b = a.to_vec();
    for i in 0..n {
        b[i * n + i] += eps;
    }
    cholesky(&b, n)
}

/// Solve `L x = b` for lower-triangular `L`.
pub fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve `Lᵀ x = b` for lower-triangular `L`.
pub fn backward_sub_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Solve `a x = b` given the lower Cholesky factor of `a`.
pub fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    backward_sub_t(l, n, &forward_sub(l, n, b))
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn chol_inverse(l: &[f64], n: usize) -> Vec<f64> {
    let mut inv = vec![0.0; n * n];
    let mut e = vec![0.0; n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = 0.0);
        e[j] = 1.0;
        let col = chol_solve(l, n, &e);
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    symmetrize(&mut inv, n);
    inv
}

/// `log det(a)` from the Cholesky factor of `a`.
pub fn chol_logdet(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

/// Inverse of an SPD matrix, with the jitter rescue.
pub fn spd_inverse(a: &[f64], n: usize) -> Option<Vec<f64>> {
    cholesky_jittered(a, n).map(|l| chol_inverse(&l, n))
}

pub fn is_spd(a: &[f64], n: usize) -> bool {
    if a.len() != n * n || a.iter().any(|v| !v.is_finite()) {
        return false;
    }
    for i in 0..n {
        for j in 0..i {
            let (x, y) = (a[i * n + j], a[j * n + i]);
            if (x - y).abs() > 1e-9 * (1.0 + x.abs().max(y.abs())) {
                return false;
            }
        }
    }
    cholesky(a, n).is_some()
}

pub fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = m;
            a[j * n + i] = m;
        }
    }
}

pub fn mat_vec(a: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|k| a[i * n + k] * x[k]).sum())
        .collect()
}

/// `L x` for lower-triangular `L`.
pub fn lower_mul(l: &[f64], n: usize, x: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|i| (0..=i).map(|k| l[i * n + k] * x[k]).sum())
        .collect()
}

/// `L Lᵀ`.
pub fn outer_lower(l: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..=j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    out
}

/// `xᵀ a x`.
pub fn quad_form(a: &[f64], n: usize, x: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += x[i] * a[i * n + j] * x[j];
        }
    }
    s
}

/// Add `w · x xᵀ` into `acc`.
pub fn add_outer(acc: &mut [f64], n: usize, x: &[f64], w: f64) {
    for i in 0..n {
        for j in 0..n {
            acc[i * n + j] += w * x[i] * x[j];
        }
    }
}

pub fn identity(n: usize) -> Vec<f64> {
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        a[i * n + i] = 1.0;
    }
    a
}

pub fn diagonal(d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut a = vec![0.0; n * n];
    for (i, v) in d.iter().enumerate() {
        a[i * n + i] = *v;
    }
    a
}

/// Sample covariance (denominator `k - 1`) of row vectors of length `n`.
pub fn sample_covariance(rows: &[Vec<f64>], n: usize) -> Option<Vec<f64>> {
    let k = rows.len();
    if k < 2 {
        return None;
    }
    let mut mean = vec![0.0; n];
    for r in rows {
        for i in 0..n {
            mean[i] += r[i] / k as f64;
        }
    }
    let mut cov = vec![0.0; n * n];
    for r in rows {
        let d: Vec<f64> = (0..n).map(|i| r[i] - mean[i]).collect();
        add_outer(&mut cov, n, &d, 1.0 / (k as f64 - 1.0));
    }
    Some(cov)
}
