//! Concurrent chains, replicates and comparison fits on a rayon pool sized by
//! `BENTCABLE_THREADS` (default: all available cores).

use bentcable_core::selection::{self, Comparison, DicJob};
use bentcable_core::simulate::{self, FitConfig, ReplicateResult, ScenarioSpec, StudyReport};
use bentcable_core::{run_chain, ChainOutput, ChainSettings, Hyperparameters, LongitudinalDataset, Variant};
use rayon::prelude::*;

use crate::error::{CliError, Result};

pub const THREADS_ENV: &str = "BENTCABLE_THREADS";

pub fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn pool() -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count()?)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// `chains` chains sharing a seed on RNG streams `0..chains`, merged.
pub fn run_chains(
    pool: &rayon::ThreadPool,
    ds: &LongitudinalDataset,
    hyper: &Hyperparameters,
    settings: &ChainSettings,
    chains: usize,
) -> Result<ChainOutput> {
    let outputs: Vec<ChainOutput> = pool.install(|| {
        (0..chains as u64)
            .into_par_iter()
            .map(|k| run_chain(ds, hyper, &ChainSettings { stream: settings.stream + k, ..settings.clone() }))
            .collect::<bentcable_core::Result<_>>()
    })?;
    Ok(ChainOutput::merge(outputs)?)
}

/// Replicates `1..=replicates` of a simulation study, concurrently.
pub fn replicate_study(
    pool: &rayon::ThreadPool,
    spec: &ScenarioSpec,
    fit: &FitConfig,
    replicates: usize,
) -> Result<StudyReport> {
    if replicates == 0 {
        return Err(bentcable_core::Error::Settings("need at least one replicate".into()).into());
    }
    let results: Vec<ReplicateResult> =
        pool.install(|| (1..=replicates).into_par_iter().map(|r| simulate::run_replicate(spec, fit, r)).collect());
    Ok(simulate::aggregate(spec, fit, &results))
}

/// DIC comparison with the fits run concurrently.
pub fn compare_models(
    pool: &rayon::ThreadPool,
    ds: &LongitudinalDataset,
    hyper: &Hyperparameters,
    p_list: &[usize],
    variants: &[Variant],
    settings: &ChainSettings,
) -> Result<Comparison> {
    let jobs = selection::comparison_jobs(ds, hyper, p_list, variants, settings)?;
    let results = pool.install(|| jobs.par_iter().map(DicJob::run).collect::<bentcable_core::Result<Vec<_>>>())?;
    Ok(selection::finish_comparison(ds, &jobs, results)?)
}
