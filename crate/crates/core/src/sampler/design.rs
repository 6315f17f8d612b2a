use alloc::vec::Vec;

use crate::data::Profile;
use crate::model::{ar_filter, q_basis, ArCoefs, BentCableCoefs, TransitionCoefs};

/// Per-individual cache of the AR-filtered design `(z, x, r)` for the current
/// `φ` and transition, plus scratch space for trial transitions.
#[derive(Debug, Clone)]
pub struct IndividualDesign {
    times: Vec<f64>,
    y: Vec<f64>,
    phi: Vec<f64>,
    intercept: f64,
    z: Vec<f64>,
    x: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
    trans: TransitionCoefs,
    trial_q: Vec<f64>,
    trial_r: Vec<f64>,
    trial: Option<TransitionCoefs>,
}

impl IndividualDesign {
    pub fn new(profile: &Profile, ar: &ArCoefs, trans: TransitionCoefs) -> Self {
        let n = profile.len();
        let mut d = IndividualDesign {
            times: profile.times.clone(),
            y: profile.responses.clone(),
            phi: Vec::new(),
            intercept: 1.0,
            z: Vec::new(),
            x: Vec::new(),
            q: alloc::vec![0.0; n],
            r: Vec::new(),
            trans,
            trial_q: alloc::vec![0.0; n],
            trial_r: Vec::new(),
            trial: None,
        };
        d.refresh_ar(ar);
        d
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn responses(&self) -> &[f64] {
        &self.y
    }

    pub fn transition(&self) -> TransitionCoefs {
        self.trans
    }

    /// Number of likelihood-contributing observations, `n_i - p`.
    pub fn n_random(&self) -> usize {
        self.times.len() - self.phi.len()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn refresh_ar(&mut self, ar: &ArCoefs) {
        self.phi.clone_from(&ar.phi);
        self.intercept = ar.intercept();
        self.z = ar_filter(&self.y, &self.phi);
        self.x = ar_filter(&self.times, &self.phi);
        self.set_transition(self.trans);
    }

    pub fn set_responses(&mut self, y: &[f64]) {
        self.y.copy_from_slice(y);
        self.z = ar_filter(&self.y, &self.phi);
    }

    pub fn set_transition(&mut self, trans: TransitionCoefs) {
        self.trans = trans;
        for (q, &t) in self.q.iter_mut().zip(&self.times) {
            *q = q_basis(t, trans);
        }
        self.r = ar_filter(&self.q, &self.phi);
        self.trial = None;
    }

    fn sse_with(&self, beta: BentCableCoefs, r: &[f64]) -> f64 {
        let c = self.intercept * beta.beta0;
        self.z
            .iter()
            .zip(&self.x)
            .zip(r)
            .map(|((&z, &x), &r)| {
                let e = z - c - beta.beta1 * x - beta.beta2 * r;
                e * e
            })
            .sum()
    }

    /// `(z - Xβ)'(z - Xβ)` at the current transition.
    pub fn sse(&self, beta: BentCableCoefs) -> f64 {
        self.sse_with(beta, &self.r)
    }

    /// Residual sum of squares at a trial transition; the trial design is
    /// kept until [`accept_trial`](Self::accept_trial) or the next change.
    pub fn trial_sse(&mut self, beta: BentCableCoefs, trans: TransitionCoefs) -> f64 {
        for (q, &t) in self.trial_q.iter_mut().zip(&self.times) {
            *q = q_basis(t, trans);
        }
        let p = self.phi.len();
        self.trial_r.clear();
        for j in p..self.trial_q.len() {
            let mut v = self.trial_q[j];
            for (k, f) in self.phi.iter().enumerate() {
                v -= f * self.trial_q[j - k - 1];
            }
            self.trial_r.push(v);
        }
        self.trial = Some(trans);
        self.sse_with(beta, &self.trial_r)
    }

    pub fn accept_trial(&mut self) {
        if let Some(t) = self.trial.take() {
            self.trans = t;
            core::mem::swap(&mut self.q, &mut self.trial_q);
            core::mem::swap(&mut self.r, &mut self.trial_r);
        }
    }

    /// `X'X` and `X'z` with `X = (1 - Σφ, x, r)`.
    pub fn normal_equations(&self) -> ([f64; 9], [f64; 3]) {
        let mut xtx = [0.0; 9];
        let mut xtz = [0.0; 3];
        for j in 0..self.z.len() {
            let row = [self.intercept, self.x[j], self.r[j]];
            for a in 0..3 {
                xtz[a] += row[a] * self.z[j];
                for b in a..3 {
                    xtx[a * 3 + b] += row[a] * row[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..a {
                xtx[a * 3 + b] = xtx[b * 3 + a];
            }
        }
        (xtx, xtz)
    }

    /// Unfiltered residuals `y_j - f_j` for every observation.
    pub fn raw_residuals(&self, beta: BentCableCoefs) -> Vec<f64> {
        self.times
            .iter()
            .zip(&self.y)
            .zip(&self.q)
            .map(|((&t, &y), &q)| y - beta.beta0 - beta.beta1 * t - beta.beta2 * q)
            .collect()
    }
}
