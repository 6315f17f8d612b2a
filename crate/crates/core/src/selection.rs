//! Deviance, DIC and comparison of AR orders and mixture variants on a
//! common response block.

use alloc::format;
use alloc::vec::Vec;

use crate::data::{reduce_for_dic, LongitudinalDataset, ReducedView};
use crate::error::{Error, Result};
use crate::model::{level1_loglik, ArCoefs, BentCableCoefs, IndividualParams, Population, TransitionCoefs};
use crate::priors::Hyperparameters;
use crate::sampler::{run_chain, ChainOutput, ChainSettings, Variant};

/// `-2 ×` the Level-1 conditional log-likelihood given all individual
/// parameters and `φ`.
pub fn conditional_deviance(ds: &LongitudinalDataset, individuals: &[IndividualParams], ar: &ArCoefs) -> Result<f64> {
    Ok(-2.0 * level1_loglik(ds, individuals, ar)?)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DicReport {
    pub dbar: f64,
    pub d_at_mean: f64,
    pub p_d: f64,
    pub dic: f64,
    pub p: usize,
    pub variant: Variant,
}

impl DicReport {
    pub fn new(dbar: f64, d_at_mean: f64, p: usize, variant: Variant) -> Self {
        let p_d = dbar - d_at_mean;
        DicReport { dbar, d_at_mean, p_d, dic: dbar + p_d, p, variant }
    }
}

/// Plug-in individual parameters for the deviance at the posterior mean:
/// means of `β_i` and `σ_i²`, the modal population, `γ_i` averaged over
/// gradual draws (0 for an abrupt mode) and `τ_i` averaged over draws in the
/// modal population.
pub fn plug_in_individuals(chain: &ChainOutput) -> Result<Vec<IndividualParams>> {
    if chain.is_empty() {
        return Err(Error::EmptyChain);
    }
    let m = chain.individuals[0].len();
    let n = chain.len() as f64;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut beta = [0.0; 3];
        let mut sigma2 = 0.0;
        let (mut n_g, mut gamma_g, mut tau_g, mut tau_a) = (0usize, 0.0, 0.0, 0.0);
        for d in chain.individual(i) {
            for (b, v) in beta.iter_mut().zip(d.beta.as_array()) {
                *b += v / n;
            }
            sigma2 += d.sigma2 / n;
            match d.population {
                Population::Gradual => {
                    n_g += 1;
                    gamma_g += d.trans.gamma;
                    tau_g += d.trans.tau;
                }
                Population::Abrupt => tau_a += d.trans.tau,
            }
        }
        let n_a = chain.len() - n_g;
        let (population, trans) = if n_g >= n_a {
            (Population::Gradual, TransitionCoefs::new(gamma_g / n_g as f64, tau_g / n_g as f64))
        } else {
            (Population::Abrupt, TransitionCoefs::abrupt(tau_a / n_a as f64))
        };
        out.push(IndividualParams { beta: BentCableCoefs::from_slice(&beta), trans, population, sigma2 });
    }
    Ok(out)
}

/// Posterior mean of `φ`.
pub fn mean_ar(chain: &ChainOutput) -> ArCoefs {
    let mut phi = alloc::vec![0.0; chain.p];
    for pop in &chain.population {
        for (a, b) in phi.iter_mut().zip(&pop.ar.phi) {
            *a += b / chain.len() as f64;
        }
    }
    ArCoefs::new(phi)
}

/// DIC of a chain fitted to `ds` (the dataset the chain was run on).
pub fn compute_dic(chain: &ChainOutput, ds: &LongitudinalDataset) -> Result<DicReport> {
    if chain.deviance.is_empty() {
        return Err(Error::EmptyChain);
    }
    if chain.ids.len() != ds.len() {
        return Err(Error::Settings("chain and dataset have different numbers of profiles".into()));
    }
    let dbar = chain.deviance.iter().sum::<f64>() / chain.deviance.len() as f64;
    let plug = plug_in_individuals(chain)?;
    let d_at_mean = conditional_deviance(ds, &plug, &mean_ar(chain))?;
    Ok(DicReport::new(dbar, d_at_mean, chain.p, chain.settings.variant))
}

/// One `(p, variant)` fit of a comparison, on its reduced data.
#[derive(Debug, Clone)]
pub struct DicJob {
    pub p: usize,
    pub variant: Variant,
    pub view: ReducedView,
    pub data: LongitudinalDataset,
    pub hyper: Hyperparameters,
    pub settings: ChainSettings,
}

impl DicJob {
    pub fn run(&self) -> Result<(DicReport, ChainOutput)> {
        let chain = run_chain(&self.data, &self.hyper, &self.settings)?;
        let report = compute_dic(&chain, &self.data)?;
        Ok((report, chain))
    }
}

/// Build the fits of a comparison. Every AR order sees exactly the same
/// random observations; the jobs are refused otherwise.
pub fn comparison_jobs(
    ds: &LongitudinalDataset,
    hyper: &Hyperparameters,
    p_list: &[usize],
    variants: &[Variant],
    settings: &ChainSettings,
) -> Result<Vec<DicJob>> {
    if p_list.is_empty() || variants.is_empty() {
        return Err(Error::Settings("need at least one AR order and one variant".into()));
    }
    let p_max = *p_list.iter().max().expect("nonempty");
    let views: Vec<(usize, ReducedView)> =
        p_list.iter().map(|&p| reduce_for_dic(ds, p_max, p).map(|v| (p, v))).collect::<Result<_>>()?;
    for pr in ds.profiles() {
        let reference = views[0].1.random_indices(pr.len());
        if views.iter().any(|(_, v)| v.random_indices(pr.len()) != reference) {
            return Err(Error::Setup(format!("random observation sets differ across AR orders for `{}`", pr.id)));
        }
    }
    let mut jobs = Vec::new();
    for (p, view) in views {
        let data = view.materialize(ds)?;
        for &variant in variants {
            let k = jobs.len() as u64;
            jobs.push(DicJob {
                p,
                variant,
                view,
                data: data.clone(),
                hyper: hyper.clone().with_ar_order(p),
                settings: ChainSettings { variant, stream: settings.stream + k, ..settings.clone() },
            });
        }
    }
    Ok(jobs)
}

/// Ranked DIC reports plus the winner's chain on the full data.
#[derive(Debug, Clone)]
pub struct Comparison {
    /// Ascending by DIC.
    pub ranked: Vec<DicReport>,
    pub winner: ChainOutput,
}

/// Rank finished jobs and obtain the winner's full-data chain, re-running it
/// only when its comparison fit dropped observations.
pub fn finish_comparison(
    ds: &LongitudinalDataset,
    jobs: &[DicJob],
    results: Vec<(DicReport, ChainOutput)>,
) -> Result<Comparison> {
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[a].0.dic.total_cmp(&results[b].0.dic));
    let best = *order.first().ok_or(Error::EmptyChain)?;
    let ranked = order.iter().map(|&k| results[k].0.clone()).collect();
    let job = &jobs[best];
    let winner = if job.view.dropped == 0 {
        results.into_iter().nth(best).expect("index in range").1
    } else {
        run_chain(ds, &job.hyper, &job.settings)?
    };
    Ok(Comparison { ranked, winner })
}

/// Sequential comparison over every `(p, variant)` pair.
pub fn compare_models(
    ds: &LongitudinalDataset,
    hyper: &Hyperparameters,
    p_list: &[usize],
    variants: &[Variant],
    settings: &ChainSettings,
) -> Result<Comparison> {
    let jobs = comparison_jobs(ds, hyper, p_list, variants, settings)?;
    let results = jobs.iter().map(DicJob::run).collect::<Result<Vec<_>>>()?;
    finish_comparison(ds, &jobs, results)
}
