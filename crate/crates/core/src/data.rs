//! Longitudinal datasets and the reduced views used for comparable DICs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::ops::Range;


use crate::error::{Error, Result};

/// Minimum observations per individual.
pub const MIN_OBSERVATIONS: usize = 4;

/// One individual's measurement series.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Profile {
    pub id: String,
    pub times: Vec<f64>,
    pub responses: Vec<f64>,
}

impl Profile {
    pub fn new(id: impl Into<String>, times: Vec<f64>, responses: Vec<f64>) -> Result<Self> {
        let p = Profile { id: id.into(), times, responses };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn validate(&self) -> Result<()> {
        if self.times.len() != self.responses.len() {
            return Err(Error::Setup(format!(
                "profile `{}`: {} times but {} responses",
                self.id,
                self.times.len(),
                self.responses.len()
            )));
        }
        if self.times.len() < MIN_OBSERVATIONS {
            return Err(Error::Setup(format!(
                "profile `{}` has {} observations, need at least {MIN_OBSERVATIONS}",
                self.id,
                self.times.len()
            )));
        }
        if self.times.iter().chain(&self.responses).any(|v| !v.is_finite()) {
            return Err(Error::Setup(format!("profile `{}` has non-finite values", self.id)));
        }
        if self.times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Setup(format!(
                "profile `{}`: times must be strictly increasing",
                self.id
            )));
        }
        Ok(())
    }

    /// Largest relative deviation of the time steps from their mean step.
    pub fn spacing_irregularity(&self) -> f64 {
        let steps: Vec<f64> = self.times.windows(2).map(|w| w[1] - w[0]).collect();
        let mean = steps.iter().sum::<f64>() / steps.len() as f64;
        steps.iter().map(|s| (s - mean).abs() / mean.abs()).fold(0.0, f64::max)
    }
}

/// A parsed observation row, as produced by a file reader.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRow {
    /// 1-based row number in the source, used in error messages.
    pub row: usize,
    pub id: String,
    pub time: f64,
    pub y: f64,
}

/// Individuals with their time grids and responses.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LongitudinalDataset {
    profiles: Vec<Profile>,
}

impl LongitudinalDataset {
    /// A dataset of at least two individuals.
    pub fn new(profiles: Vec<Profile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(Error::Setup("no profiles".into()));
        }
        if profiles.len() < 2 {
            return Err(Error::Setup("a longitudinal dataset needs at least 2 individuals".into()));
        }
        Self::checked(profiles)
    }

    /// A single-individual dataset, for single-profile analyses.
    pub fn single(profile: Profile) -> Result<Self> {
        Self::checked(alloc::vec![profile])
    }

    fn checked(profiles: Vec<Profile>) -> Result<Self> {
        let mut seen = BTreeMap::new();
        for p in &profiles {
            p.validate()?;
            if seen.insert(p.id.clone(), ()).is_some() {
                return Err(Error::Setup(format!("duplicate profile id `{}`", p.id)));
            }
        }
        Ok(LongitudinalDataset { profiles })
    }

    /// Group long-format rows by id (first-appearance order). Within an id,
    /// rows must appear in strictly increasing time order.
    pub fn from_rows(rows: &[ObservationRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Setup("no profiles".into()));
        }
        let mut order: Vec<String> = Vec::new();
        let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for r in rows {
            if !r.time.is_finite() || !r.y.is_finite() {
                return Err(Error::Setup(format!("row {}: non-finite value", r.row)));
            }
            let entry = groups.entry(r.id.clone()).or_insert_with(|| {
                order.push(r.id.clone());
                (Vec::new(), Vec::new())
            });
            if let Some(&last) = entry.0.last() {
                if r.time == last {
                    return Err(Error::Setup(format!(
                        "row {}: duplicate (id, time) = ({}, {})",
                        r.row, r.id, r.time
                    )));
                }
                if r.time < last {
                    return Err(Error::Setup(format!(
                        "row {}: time {} for id `{}` is not increasing (previous {})",
                        r.row, r.time, r.id, last
                    )));
                }
            }
            entry.0.push(r.time);
            entry.1.push(r.y);
        }
        let profiles = order
            .into_iter()
            .map(|id| {
                let (t, y) = groups.remove(&id).unwrap_or_default();
                Profile::new(id, t, y)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(profiles)
    }

    pub fn profiles(&self) -> &[Profile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn min_len(&self) -> usize {
        self.profiles.iter().map(Profile::len).min().unwrap_or(0)
    }

    pub fn total_observations(&self) -> usize {
        self.profiles.iter().map(Profile::len).sum()
    }

    /// True when any profile's time steps deviate from equal spacing by more
    /// than `1e-9` relative tolerance.
    pub fn has_unequal_spacing(&self) -> bool {
        self.profiles.iter().any(|p| p.spacing_irregularity() > 1e-9)
    }

    /// Same individuals and times with new responses.
    pub fn with_responses(&self, responses: Vec<Vec<f64>>) -> Result<Self> {
        if responses.len() != self.profiles.len() {
            return Err(Error::Setup("response block count mismatch".into()));
        }
        let profiles = self
            .profiles
            .iter()
            .zip(responses)
            .map(|(p, y)| Profile::new(p.id.clone(), p.times.clone(), y))
            .collect::<Result<Vec<_>>>()?;
        Self::checked(profiles)
    }
}

/// A dataset with a fixed number of leading observations dropped from every
/// profile, so that fits with different AR orders share one random block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducedView {
    /// Leading observations discarded entirely (`p_max - p`).
    pub dropped: usize,
    /// Observations after the dropped ones that serve as the known AR
    /// preamble (`p`).
    pub preamble: usize,
}

impl ReducedView {
    pub fn identity() -> Self {
        ReducedView { dropped: 0, preamble: 0 }
    }

    /// Index offset of the view into the source profiles.
    pub fn offset(&self) -> usize {
        self.dropped
    }

    /// Indices (into the source profile) of the likelihood-contributing
    /// observations.
    pub fn random_indices(&self, n_i: usize) -> Range<usize> {
        (self.dropped + self.preamble)..n_i
    }

    /// The reduced dataset on which a chain with AR order `preamble` runs.
    pub fn materialize(&self, ds: &LongitudinalDataset) -> Result<LongitudinalDataset> {
        let profiles = ds
            .profiles()
            .iter()
            .map(|p| {
                Profile::new(
                    p.id.clone(),
                    p.times[self.dropped..].to_vec(),
                    p.responses[self.dropped..].to_vec(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        LongitudinalDataset::checked(profiles)
    }
}

/// Drop the first `p_max - p` observations of each profile; the next `p` are
/// the known AR preamble and observations `p_max + 1 ..= n_i` (1-based) are
/// random for every `p`.
pub fn reduce_for_dic(ds: &LongitudinalDataset, p_max: usize, p: usize) -> Result<ReducedView> {
    if p > p_max {
        return Err(Error::Setup(format!("AR order {p} exceeds p_max {p_max}")));
    }
    if let Some(short) = ds.profiles().iter().find(|pr| pr.len() <= p_max) {
        return Err(Error::Setup(format!(
            "profile `{}` has {} observations, need more than p_max = {p_max}",
            short.id,
            short.len()
        )));
    }
    Ok(ReducedView { dropped: p_max - p, preamble: p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn rows(spec: &[(&str, f64, f64)]) -> Vec<ObservationRow> {
        spec.iter()
            .enumerate()
            .map(|(k, (id, t, y))| ObservationRow { row: k + 2, id: (*id).into(), time: *t, y: *y })
            .collect()
    }

    fn toy(m: usize, n: usize) -> LongitudinalDataset {
        let profiles = (0..m)
            .map(|i| {
                let t: Vec<f64> = (0..n).map(|j| j as f64).collect();
                let y = t.iter().map(|v| v + i as f64).collect();
                Profile::new(format!("r{i}"), t, y).unwrap()
            })
            .collect();
        LongitudinalDataset::new(profiles).unwrap()
    }

    #[test]
    fn groups_rows_by_id() {
        let mut spec = vec![];
        for id in ["a", "b"] {
            for j in 0..4 {
                spec.push((id, j as f64, 1.0));
            }
        }
        let ds = LongitudinalDataset::from_rows(&rows(&spec)).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.profiles()[1].id, "b");
        assert_eq!(ds.min_len(), 4);
    }

    #[test]
    fn duplicate_time_names_row() {
        let r = rows(&[("a", 0.0, 1.0), ("a", 1.0, 1.0), ("a", 1.0, 2.0)]);
        let err = LongitudinalDataset::from_rows(&r).unwrap_err();
        assert!(format!("{err}").contains("row 4"), "{err}");
    }

    #[test]
    fn decreasing_time_rejected() {
        let r = rows(&[("a", 0.0, 1.0), ("a", 2.0, 1.0), ("a", 1.0, 2.0)]);
        assert!(LongitudinalDataset::from_rows(&r).is_err());
    }

    #[test]
    fn empty_input_has_no_profiles() {
        let err = LongitudinalDataset::from_rows(&[]).unwrap_err();
        assert!(format!("{err}").contains("no profiles"));
    }

    #[test]
    fn short_profiles_rejected() {
        assert!(Profile::new("x", vec![0.0, 1.0, 2.0], vec![0.0; 3]).is_err());
    }

    #[test]
    fn reduction_drops_leading_observations() {
        let ds = toy(2, 10);
        let v0 = reduce_for_dic(&ds, 3, 0).unwrap();
        assert_eq!((v0.dropped, v0.preamble), (3, 0));
        // 1-based index 4 is the first random observation
        assert_eq!(v0.random_indices(10).start, 3);
        let v2 = reduce_for_dic(&ds, 3, 2).unwrap();
        assert_eq!(v2.dropped, 1);
        let m = v2.materialize(&ds).unwrap();
        // preamble is (y_2, y_3) in 1-based indexing
        assert_eq!(&m.profiles()[0].responses[..2], &ds.profiles()[0].responses[1..3]);
        assert_eq!(reduce_for_dic(&ds, 0, 0).unwrap(), ReducedView::identity());
    }

    #[test]
    fn random_block_is_shared_across_orders() {
        let ds = toy(3, 12);
        let sets: Vec<_> = (0..=3).map(|p| reduce_for_dic(&ds, 3, p).unwrap().random_indices(12)).collect();
        assert!(sets.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn reduction_requires_long_profiles() {
        let ds = toy(2, 4);
        assert!(reduce_for_dic(&ds, 4, 0).is_err());
        assert!(reduce_for_dic(&ds, 1, 2).is_err());
    }

    #[test]
    fn spacing_detection() {
        let ds = toy(2, 6);
        assert!(!ds.has_unequal_spacing());
        let p = Profile::new("u", vec![0.0, 1.0, 2.0, 4.0], vec![0.0; 4]).unwrap();
        assert!(LongitudinalDataset::new(vec![p, ds.profiles()[0].clone()]).unwrap().has_unequal_spacing());
    }
}
