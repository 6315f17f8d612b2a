//! Level-3 hyperparameters, their vague defaults, and a data-driven
//! elicitation of the Wishart scale matrices from coarse per-profile fits.
//!
//! Matrices are stored flat, row-major.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;

use crate::data::{LongitudinalDataset, Profile};
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{q_basis, BentCableCoefs, TransitionCoefs};
use crate::Warning;

/// Gradual/abrupt threshold on a fitted `γ̂` as a fraction of the time range.
pub const GRADUAL_THRESHOLD: f64 = 0.02;

/// Diagonal of the vague prior covariances on the population means.
pub const VAGUE_VARIANCE: f64 = 1e4;
/// Shape/rate hyperparameters of the diffuse gamma priors.
pub const DIFFUSE_GAMMA: f64 = 1e-4;
/// Ridge added to elicited covariances that fail the SPD check.
pub const ELICIT_RIDGE: f64 = 1e-8;

/// All Level-3 constants.
///
/// Priors: `μ_β ~ N(h1, H1)`, `μ_α ~ N(h2, H2)`, `φ ~ N(h3, H3)`,
/// `μ_τA ~ N(a0, a1)`, `Σ_β⁻¹ ~ W(ν1, (ν1 A1)⁻¹)`, `Σ_α⁻¹ ~ W(ν2, (ν2 A2)⁻¹)`,
/// `σ_τA⁻² ~ G(b0/2, b1/2)`, `σ_i⁻² ~ G(d0/2, d1/2)`, `ω ~ B(c0, c1)`.
/// Gamma laws are shape/rate; a Wishart `W(ν, S)` has mean `νS`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparameters {
    pub h1: [f64; 3],
    #[cfg_attr(feature = "serde", serde(rename = "H1"))]
    pub h1_cov: [f64; 9],
    pub h2: [f64; 2],
    #[cfg_attr(feature = "serde", serde(rename = "H2"))]
    pub h2_cov: [f64; 4],
    pub h3: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(rename = "H3"))]
    pub h3_cov: Vec<f64>,
    pub a0: f64,
    pub a1: f64,
    pub nu1: f64,
    #[cfg_attr(feature = "serde", serde(rename = "A1"))]
    pub scale_beta: [f64; 9],
    pub nu2: f64,
    #[cfg_attr(feature = "serde", serde(rename = "A2"))]
    pub scale_alpha: [f64; 4],
    pub b0: f64,
    pub b1: f64,
    pub c0: f64,
    pub c1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl Hyperparameters {
    /// AR order implied by `h3`.
    pub fn ar_order(&self) -> usize {
        self.h3.len()
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.h3.len();
        if self.h3_cov.len() != p * p {
            return Err(Error::Settings("H3 must be p×p with p = len(h3)".into()));
        }
        if !linalg::is_spd(&self.h1_cov, 3) {
            return Err(Error::NotSpd("H1"));
        }
        if !linalg::is_spd(&self.h2_cov, 2) {
            return Err(Error::NotSpd("H2"));
        }
        if p > 0 && !linalg::is_spd(&self.h3_cov, p) {
            return Err(Error::NotSpd("H3"));
        }
        if !linalg::is_spd(&self.scale_beta, 3) {
            return Err(Error::NotSpd("A1"));
        }
        if !linalg::is_spd(&self.scale_alpha, 2) {
            return Err(Error::NotSpd("A2"));
        }
        if !(self.nu1 >= 3.0) || !(self.nu2 >= 2.0) {
            return Err(Error::Settings("Wishart degrees of freedom must be at least the matrix order".into()));
        }
        let positive = [("a1", self.a1), ("b0", self.b0), ("b1", self.b1), ("c0", self.c0), ("c1", self.c1), ("d0", self.d0), ("d1", self.d1)];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Settings(alloc::format!("hyperparameter {name} must be positive and finite")));
        }
        Ok(())
    }

    /// Same hyperparameters with the AR prior resized to order `p` (vague).
    pub fn with_ar_order(mut self, p: usize) -> Self {
        if self.h3.len() != p {
            self.h3 = vec![0.0; p];
            self.h3_cov = linalg::diagonal(&vec![VAGUE_VARIANCE; p]);
        }
        self
    }
}

/// Vague, minimally informative defaults around the given Wishart scales.
pub fn default_hyperparameters(p: usize, scale_beta: [f64; 9], scale_alpha: [f64; 4]) -> Result<Hyperparameters> {
    if !linalg::is_spd(&scale_beta, 3) {
        return Err(Error::NotSpd("A1"));
    }
    if !linalg::is_spd(&scale_alpha, 2) {
        return Err(Error::NotSpd("A2"));
    }
    let v = VAGUE_VARIANCE;
    Ok(Hyperparameters {
        h1: [0.0; 3],
        h1_cov: [v, 0.0, 0.0, 0.0, v, 0.0, 0.0, 0.0, v],
        h2: [0.0; 2],
        h2_cov: [v, 0.0, 0.0, v],
        h3: vec![0.0; p],
        h3_cov: linalg::diagonal(&vec![v; p]),
        a0: 0.0,
        a1: v,
        nu1: 3.0,
        scale_beta,
        nu2: 2.0,
        scale_alpha,
        b0: DIFFUSE_GAMMA,
        b1: DIFFUSE_GAMMA,
        c0: 1.0,
        c1: 1.0,
        d0: DIFFUSE_GAMMA,
        d1: DIFFUSE_GAMMA,
    })
}

/// A coarse least-squares bent-cable fit of one profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFit {
    pub beta: BentCableCoefs,
    pub trans: TransitionCoefs,
    pub rss: f64,
}

impl GridFit {
    pub fn residual_variance(&self, n: usize) -> f64 {
        self.rss / (n.saturating_sub(5).max(1)) as f64
    }
}

/// The `(tau, gamma)` search grid for a profile: 41 centers over the central
/// 80% of the time range (positive ones only), and half-widths
/// `{0} ∪` 20 log-spaced values up to half the range.
pub fn elicitation_grid(profile: &Profile) -> (Vec<f64>, Vec<f64>) {
    let t0 = profile.times[0];
    let t1 = *profile.times.last().unwrap_or(&t0);
    let range = t1 - t0;
    let taus = (0..41)
        .map(|k| t0 + range * (0.1 + 0.8 * k as f64 / 40.0))
        .filter(|&t| t > 0.0)
        .collect();
    let lo = (range / 200.0).ln();
    let hi = (range / 2.0).ln();
    let mut gammas = vec![0.0];
    gammas.extend((0..20).map(|k| (lo + (hi - lo) * k as f64 / 19.0).exp()));
    (taus, gammas)
}

/// OLS fit of `(β0, β1, β2)` with the transition held fixed.
pub fn ols_given_transition(profile: &Profile, trans: TransitionCoefs) -> Option<GridFit> {
    let mut xtx = [0.0; 9];
    let mut xty = [0.0; 3];
    for (&t, &y) in profile.times.iter().zip(&profile.responses) {
        let row = [1.0, t, q_basis(t, trans)];
        for a in 0..3 {
            xty[a] += row[a] * y;
            for b in 0..3 {
                xtx[a * 3 + b] += row[a] * row[b];
            }
        }
    }
    // reject near-singular designs (bend outside the observed range)
    let scale = (0..3).map(|i| xtx[i * 4]).fold(0.0, f64::max);
    if xtx[8] <= 1e-10 * scale.max(1.0) {
        return None;
    }
    let l = linalg::cholesky(&xtx, 3)?;
    let b = linalg::chol_solve(&l, 3, &xty);
    let beta = BentCableCoefs::from_slice(&b);
    let rss = profile
        .times
        .iter()
        .zip(&profile.responses)
        .map(|(&t, &y)| {
            let e = y - crate::model::bent_cable(t, beta, trans);
            e * e
        })
        .sum();
    Some(GridFit { beta, trans, rss })
}

/// Exhaustive grid search over `(tau, gamma)` with OLS for the linear part.
/// Returns `None` for degenerate (constant) profiles.
pub fn grid_fit(profile: &Profile) -> Option<GridFit> {
    let y0 = profile.responses[0];
    if profile.responses.iter().all(|&y| (y - y0).abs() <= 1e-12 * y0.abs().max(1.0)) {
        return None;
    }
    let (taus, gammas) = elicitation_grid(profile);
    let mut best: Option<GridFit> = None;
    for &tau in &taus {
        for &gamma in &gammas {
            if let Some(fit) = ols_given_transition(profile, TransitionCoefs::new(gamma, tau)) {
                if best.is_none_or(|b| fit.rss < b.rss) {
                    best = Some(fit);
                }
            }
        }
    }
    best
}

/// Result of [`elicit_scale_matrices`].
#[derive(Debug, Clone, PartialEq)]
pub struct Elicitation {
    pub scale_beta: [f64; 9],
    pub scale_alpha: [f64; 4],
    /// Sample variance of `log τ̂` over all usable fits.
    pub scale_tau_a: f64,
    /// Mean `(log γ̂, log τ̂)` of the fits that look gradual.
    pub center_alpha: Option<[f64; 2]>,
    /// Mean `log τ̂` of the fits that look abrupt.
    pub center_tau_a: Option<f64>,
    /// Per-profile fits; `None` for excluded degenerate profiles.
    pub fits: Vec<Option<GridFit>>,
    pub warnings: Vec<Warning>,
}

fn to_spd<const N: usize>(cov: Vec<f64>, n: usize) -> [f64; N] {
    let mut out = [0.0; N];
    out.copy_from_slice(&cov);
    if !linalg::is_spd(&out, n) {
        for i in 0..n {
            out[i * n + i] += ELICIT_RIDGE;
        }
    }
    out
}

/// Sample covariances of the per-profile coarse estimates of `β` and of
/// `(log γ, log τ)` (gradual fits only), used as prior guesses `A1`, `A2`.
pub fn elicit_scale_matrices(ds: &LongitudinalDataset) -> Elicitation {
    let fits: Vec<Option<GridFit>> = ds.profiles().iter().map(grid_fit).collect();
    let mut warnings = Vec::new();

    let betas: Vec<Vec<f64>> = fits.iter().flatten().map(|f| f.beta.as_array().to_vec()).collect();
    let scale_beta = if betas.len() >= 4 {
        to_spd::<9>(linalg::sample_covariance(&betas, 3).expect("at least two rows"), 3)
    } else {
        warnings.push(Warning::ElicitationFallback { matrix: "A1", usable: betas.len() });
        let mut id = [0.0; 9];
        id.copy_from_slice(&linalg::identity(3));
        id
    };

    // only fits that look gradual describe the spread of Population G
    let mut xis: Vec<Vec<f64>> = Vec::new();
    let mut abrupt_kappas: Vec<f64> = Vec::new();
    for (pr, fit) in ds.profiles().iter().zip(&fits) {
        let Some(f) = fit else { continue };
        let range = pr.times[pr.len() - 1] - pr.times[0];
        if f.trans.gamma > GRADUAL_THRESHOLD * range {
            xis.push(vec![f.trans.gamma.ln(), f.trans.tau.ln()]);
        } else if f.trans.tau > 0.0 {
            abrupt_kappas.push(f.trans.tau.ln());
        }
    }
    let center_alpha = (!xis.is_empty()).then(|| {
        let n = xis.len() as f64;
        [xis.iter().map(|x| x[0]).sum::<f64>() / n, xis.iter().map(|x| x[1]).sum::<f64>() / n]
    });
    let center_tau_a = (!abrupt_kappas.is_empty()).then(|| abrupt_kappas.iter().sum::<f64>() / abrupt_kappas.len() as f64);
    let scale_alpha = if xis.len() >= 4 {
        to_spd::<4>(linalg::sample_covariance(&xis, 2).expect("at least two rows"), 2)
    } else {
        warnings.push(Warning::ElicitationFallback { matrix: "A2", usable: xis.len() });
        [1.0, 0.0, 0.0, 1.0]
    };

    let kappas: Vec<Vec<f64>> = fits.iter().flatten().filter(|f| f.trans.tau > 0.0).map(|f| vec![f.trans.tau.ln()]).collect();
    let scale_tau_a = match linalg::sample_covariance(&kappas, 1) {
        Some(v) if kappas.len() >= 4 && v[0].is_finite() => if v[0] > 0.0 { v[0] } else { ELICIT_RIDGE },
        _ => {
            warnings.push(Warning::ElicitationFallback { matrix: "tau_a", usable: kappas.len() });
            1.0
        }
    };

    Elicitation { scale_beta, scale_alpha, scale_tau_a, center_alpha, center_tau_a, fits, warnings }
}

/// Prior variance of the elicited location priors on log-scale means.
pub const LOCATION_PRIOR_VARIANCE: f64 = 1.0;

/// Weakly informative hyperparameters built from an [`Elicitation`].
///
/// Starts from [`default_hyperparameters`] with the elicited Wishart scales.
/// The gamma prior on `σ_τA⁻²` follows the Wishart rule (degrees of freedom
/// equal to the order, scale equal to a prior estimate): `b0 = 1`,
/// `b1 = Var(log τ̂)`. The priors on `μ_α` and `μ_τA` are centred on the
/// gradual-looking and abrupt-looking fits with unit variance on the log
/// scale; a population with no such fits keeps the vague default, except that
/// `μ_τA` then falls back to the gradual onset centre.
pub fn elicited_hyperparameters(p: usize, e: &Elicitation) -> Result<Hyperparameters> {
    let mut h = default_hyperparameters(p, e.scale_beta, e.scale_alpha)?;
    h.b0 = 1.0;
    h.b1 = e.scale_tau_a;
    let v = LOCATION_PRIOR_VARIANCE;
    if let Some(c) = e.center_alpha {
        h.h2 = c;
        h.h2_cov = [v, 0.0, 0.0, v];
    }
    if let Some(c) = e.center_tau_a.or(e.center_alpha.map(|c| c[1])) {
        h.a0 = c;
        h.a1 = v;
    }
    Ok(h)
}
