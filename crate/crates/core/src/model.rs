//! Bent-cable mean structure, its broken-stick limit, critical time points,
//! and the AR(p)-filtered design quantities of the conditional likelihood.
//!
//! A bent cable is linear with slope `beta1` up to `tau - gamma`, bends
//! quadratically over `[tau - gamma, tau + gamma]`, and continues linearly
//! with slope `beta1 + beta2`. With `gamma == 0` it is a broken stick.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods shadow the trait when std is linked
use num_traits::Float;

use crate::data::{LongitudinalDataset, Profile};
use crate::dist::LN_2PI;
use crate::error::{Error, Result};

/// Linear coefficients: incoming intercept, incoming slope, slope change.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BentCableCoefs {
    pub beta0: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl BentCableCoefs {
    pub fn new(beta0: f64, beta1: f64, beta2: f64) -> Self {
        BentCableCoefs { beta0, beta1, beta2 }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.beta0, self.beta1, self.beta2]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        BentCableCoefs { beta0: v[0], beta1: v[1], beta2: v[2] }
    }

    pub fn outgoing_slope(&self) -> f64 {
        self.beta1 + self.beta2
    }
}

/// Transition coefficients: bend half-width `gamma` and center `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransitionCoefs {
    pub gamma: f64,
    pub tau: f64,
}

impl TransitionCoefs {
    pub fn new(gamma: f64, tau: f64) -> Self {
        TransitionCoefs { gamma, tau }
    }

    pub fn abrupt(tau: f64) -> Self {
        TransitionCoefs { gamma: 0.0, tau }
    }

    pub fn is_valid(&self) -> bool {
        self.gamma >= 0.0 && self.tau > 0.0 && self.gamma.is_finite() && self.tau.is_finite()
    }
}

/// AR(p) coefficients of the within-individual noise.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArCoefs {
    pub phi: Vec<f64>,
}

impl ArCoefs {
    pub fn new(phi: Vec<f64>) -> Self {
        ArCoefs { phi }
    }

    pub fn zeros(p: usize) -> Self {
        ArCoefs { phi: alloc::vec![0.0; p] }
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    /// `1 - Σ φ_k`, the intercept column of the filtered design.
    pub fn intercept(&self) -> f64 {
        1.0 - self.phi.iter().sum::<f64>()
    }

    /// Whether all roots of `1 - φ₁z - … - φ_p z^p` lie outside the unit
    /// circle, via the step-down (reverse Durbin–Levinson) recursion: the
    /// process is stationary iff every partial autocorrelation is inside
    /// `(-1, 1)`.
    pub fn is_stationary(&self) -> bool {
        let mut a = self.phi.clone();
        while let Some(&last) = a.last() {
            if !(last.abs() < 1.0) {
                return false;
            }
            let k = a.len();
            let denom = 1.0 - last * last;
            let prev: Vec<f64> = (0..k - 1).map(|j| (a[j] + last * a[k - 2 - j]) / denom).collect();
            a = prev;
        }
        true
    }
}

/// Membership of an individual: abrupt transitions (`gamma == 0`) or
/// gradual ones (`gamma > 0`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Population {
    Abrupt,
    Gradual,
}

impl Population {
    pub fn other(self) -> Self {
        match self {
            Population::Abrupt => Population::Gradual,
            Population::Gradual => Population::Abrupt,
        }
    }

    /// The 0/1 mixture indicator (1 = gradual).
    pub fn indicator(self) -> u8 {
        match self {
            Population::Abrupt => 0,
            Population::Gradual => 1,
        }
    }

    pub fn from_indicator(i: u8) -> Self {
        if i == 0 {
            Population::Abrupt
        } else {
            Population::Gradual
        }
    }
}

/// Per-individual regression state.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndividualParams {
    pub beta: BentCableCoefs,
    pub trans: TransitionCoefs,
    pub population: Population,
    /// Innovation variance.
    pub sigma2: f64,
}

impl IndividualParams {
    /// Population membership agrees with the bend width and the variance is
    /// positive.
    pub fn is_consistent(&self) -> bool {
        let width_ok = match self.population {
            Population::Abrupt => self.trans.gamma == 0.0,
            Population::Gradual => self.trans.gamma > 0.0,
        };
        width_ok && self.sigma2 > 0.0 && self.trans.tau > 0.0
    }
}

/// The quadratic-bend basis.
///
/// `0` left of `tau - gamma`, `(t - tau + gamma)² / 4gamma` on the bend
/// (closed interval), `t - tau` to the right. For `gamma == 0` this is the
/// hinge `max(t - tau, 0)`.
#[inline]
pub fn q_basis(t: f64, trans: TransitionCoefs) -> f64 {
    let TransitionCoefs { gamma, tau } = trans;
    let d = t - tau;
    if gamma == 0.0 {
        return if d > 0.0 { d } else { 0.0 };
    }
    if d.abs() <= gamma {
        let u = d + gamma;
        u * u / (4.0 * gamma)
    } else if d > gamma {
        d
    } else {
        0.0
    }
}

#[inline]
pub fn bent_cable(t: f64, lin: BentCableCoefs, trans: TransitionCoefs) -> f64 {
    lin.beta0 + lin.beta1 * t + lin.beta2 * q_basis(t, trans)
}

/// Time at which the slope of the cable changes sign, or `None` when the
/// incoming and outgoing slopes share a sign.
pub fn critical_time_point(lin: BentCableCoefs, trans: TransitionCoefs) -> Option<f64> {
    let b1 = lin.beta1;
    let out = lin.beta1 + lin.beta2;
    let changes = (b1 > 0.0 && out < 0.0) || (b1 < 0.0 && out > 0.0);
    if !changes || lin.beta2 == 0.0 {
        return None;
    }
    if trans.gamma == 0.0 {
        Some(trans.tau)
    } else {
        Some(trans.tau - trans.gamma - 2.0 * b1 * trans.gamma / lin.beta2)
    }
}

/// AR(p)-filtered quantities for observations `p+1 ..= n` of one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ArDesign {
    /// `y_j - Σ φ_k y_{j-k}`
    pub z: Vec<f64>,
    /// `t_j - Σ φ_k t_{j-k}`
    pub x: Vec<f64>,
    /// `q_j - Σ φ_k q_{j-k}`
    pub r: Vec<f64>,
    /// `1 - Σ φ_k`
    pub intercept: f64,
}

/// Apply the AR filter `v_j ↦ v_j - Σ φ_k v_{j-k}` for `j = p..n` (0-based).
pub fn ar_filter(v: &[f64], phi: &[f64]) -> Vec<f64> {
    let p = phi.len();
    (p..v.len())
        .map(|j| v[j] - phi.iter().enumerate().map(|(k, f)| f * v[j - k - 1]).sum::<f64>())
        .collect()
}

pub fn ar_transform(times: &[f64], y: &[f64], q: &[f64], ar: &ArCoefs) -> Result<ArDesign> {
    let p = ar.order();
    let n = times.len();
    if n <= p || y.len() != n || q.len() != n {
        return Err(Error::Setup(format!(
            "profile with {n} observations cannot carry an AR({p}) preamble"
        )));
    }
    Ok(ArDesign {
        z: ar_filter(y, &ar.phi),
        x: ar_filter(times, &ar.phi),
        r: ar_filter(q, &ar.phi),
        intercept: ar.intercept(),
    })
}

/// Conditional Level-1 log-likelihood of one profile, treating the first `p`
/// observations as known.
pub fn profile_loglik(profile: &Profile, ind: &IndividualParams, ar: &ArCoefs) -> Result<f64> {
    if !(ind.sigma2 > 0.0) {
        return Err(Error::Domain(format!("innovation variance {} must be positive", ind.sigma2)));
    }
    let q: Vec<f64> = profile.times.iter().map(|&t| q_basis(t, ind.trans)).collect();
    let d = ar_transform(&profile.times, &profile.responses, &q, ar)?;
    let b = ind.beta;
    let ss: f64 = (0..d.z.len())
        .map(|j| {
            let e = d.z[j] - b.beta0 * d.intercept - b.beta1 * d.x[j] - b.beta2 * d.r[j];
            e * e
        })
        .sum();
    let n = d.z.len() as f64;
    Ok(-0.5 * (n * (LN_2PI + ind.sigma2.ln()) + ss / ind.sigma2))
}

/// Sum of [`profile_loglik`] over all individuals.
pub fn level1_loglik(ds: &LongitudinalDataset, individuals: &[IndividualParams], ar: &ArCoefs) -> Result<f64> {
    if individuals.len() != ds.len() {
        return Err(Error::Setup("parameter count does not match the dataset".into()));
    }
    ds.profiles()
        .iter()
        .zip(individuals)
        .map(|(p, ind)| profile_loglik(p, ind, ar))
        .sum()
}
