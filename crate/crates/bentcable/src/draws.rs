//! Chain persistence: `draws.csv` holds one row per retained draw (deviance,
//! every population parameter, every individual parameter) and `chain.json`
//! the settings and diagnostics needed to rebuild the chain.

use std::path::Path;

use bentcable_core::{
    ArCoefs, BentCableCoefs, ChainOutput, ChainSettings, IndividualParams, Population, PopulationParams, TransitionCoefs,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::{csv_write_error, read_json, write_json};

pub const DRAWS_FILE: &str = "draws.csv";
pub const CHAIN_FILE: &str = "chain.json";

/// Everything in a [`ChainOutput`] except the draws, plus the data time range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub settings: ChainSettings,
    pub chains: usize,
    pub p: usize,
    pub ids: Vec<String>,
    pub alpha_acceptance: Vec<f64>,
    pub indicator_flips: Vec<usize>,
    pub phi_draws: usize,
    pub stationary_draws: usize,
    pub cholesky_failures: usize,
    pub time_range: [f64; 2],
}

const SIGMA_BETA: [(usize, usize, &str); 6] = [
    (0, 0, "Sigma_beta11"),
    (1, 1, "Sigma_beta22"),
    (2, 2, "Sigma_beta33"),
    (0, 1, "Sigma_beta12"),
    (0, 2, "Sigma_beta13"),
    (1, 2, "Sigma_beta23"),
];
const INDIVIDUAL_FIELDS: [&str; 7] = ["beta0", "beta1", "beta2", "gamma", "tau", "I", "sigma2"];

pub fn columns(p: usize, ids: &[String]) -> Vec<String> {
    let mut c: Vec<String> = ["draw", "deviance", "mu_beta0", "mu_beta1", "mu_beta2"].map(String::from).to_vec();
    c.extend(SIGMA_BETA.iter().map(|s| s.2.to_string()));
    c.extend(
        ["mu_gamma", "mu_tau", "Sigma_alpha11", "Sigma_alpha22", "Sigma_alpha12", "mu_tau_a", "sigma2_tau_a", "omega"]
            .map(String::from),
    );
    c.extend((1..=p).map(|k| format!("phi{k}")));
    for id in ids {
        c.extend(INDIVIDUAL_FIELDS.iter().map(|f| format!("{id}:{f}")));
    }
    c
}

fn row(s: usize, deviance: f64, pop: &PopulationParams, inds: &[IndividualParams]) -> Vec<String> {
    let mut v: Vec<f64> = vec![deviance];
    v.extend(pop.mu_beta);
    v.extend(SIGMA_BETA.iter().map(|&(a, b, _)| pop.sigma_beta[a * 3 + b]));
    v.extend([pop.mu_alpha[0], pop.mu_alpha[1], pop.sigma_alpha[0], pop.sigma_alpha[3], pop.sigma_alpha[1]]);
    v.extend([pop.mu_tau_a, pop.sigma2_tau_a, pop.omega]);
    v.extend(&pop.ar.phi);
    for d in inds {
        let gradual = if d.population == Population::Gradual { 1.0 } else { 0.0 };
        v.extend([d.beta.beta0, d.beta.beta1, d.beta.beta2, d.trans.gamma, d.trans.tau, gradual, d.sigma2]);
    }
    std::iter::once(s.to_string()).chain(v.iter().map(f64::to_string)).collect()
}

/// Write `draws.csv` and `chain.json` into `dir`.
pub fn write_chain(dir: &Path, chain: &ChainOutput, chains: usize, time_range: [f64; 2]) -> Result<()> {
    let path = dir.join(DRAWS_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_write_error(&path, e))?;
    w.write_record(columns(chain.p, &chain.ids)).map_err(|e| csv_write_error(&path, e))?;
    for (s, (pop, inds)) in chain.population.iter().zip(&chain.individuals).enumerate() {
        w.write_record(row(s, chain.deviance[s], pop, inds)).map_err(|e| csv_write_error(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    let meta = ChainMeta {
        settings: chain.settings.clone(),
        chains,
        p: chain.p,
        ids: chain.ids.clone(),
        alpha_acceptance: chain.alpha_acceptance.clone(),
        indicator_flips: chain.indicator_flips.clone(),
        phi_draws: chain.phi_draws,
        stationary_draws: chain.stationary_draws,
        cholesky_failures: chain.cholesky_failures,
        time_range,
    };
    write_json(&dir.join(CHAIN_FILE), &meta)
}

/// Rebuild a chain written by [`write_chain`].
pub fn read_chain(dir: &Path) -> Result<(ChainOutput, ChainMeta)> {
    let meta: ChainMeta = read_json(&dir.join(CHAIN_FILE))?;
    let path = dir.join(DRAWS_FILE);
    let mut reader = csv::Reader::from_path(&path).map_err(|e| csv_write_error(&path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::Format { path: path.clone(), message: e.to_string() })?
        .iter()
        .map(String::from)
        .collect();
    if header != columns(meta.p, &meta.ids) {
        return Err(CliError::Format { path, message: format!("columns do not match {CHAIN_FILE}") });
    }
    let mut chain = ChainOutput {
        settings: meta.settings.clone(),
        p: meta.p,
        ids: meta.ids.clone(),
        population: Vec::new(),
        individuals: Vec::new(),
        deviance: Vec::new(),
        alpha_acceptance: meta.alpha_acceptance.clone(),
        indicator_flips: meta.indicator_flips.clone(),
        phi_draws: meta.phi_draws,
        stationary_draws: meta.stationary_draws,
        cholesky_failures: meta.cholesky_failures,
    };
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Format { path: path.clone(), message: e.to_string() })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let v: Vec<f64> = record
            .iter()
            .skip(1)
            .map(|x| x.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| CliError::Parse { path: path.clone(), row: line, message: e.to_string() })?;
        let mut it = v.into_iter();
        let mut next = || it.next().expect("length checked by the csv reader");
        chain.deviance.push(next());
        let mu_beta = [next(), next(), next()];
        let mut sigma_beta = [0.0; 9];
        for &(a, b, _) in &SIGMA_BETA {
            let x = next();
            sigma_beta[a * 3 + b] = x;
            sigma_beta[b * 3 + a] = x;
        }
        let mu_alpha = [next(), next()];
        let (s11, s22, s12) = (next(), next(), next());
        let (mu_tau_a, sigma2_tau_a, omega) = (next(), next(), next());
        let phi: Vec<f64> = (0..meta.p).map(|_| next()).collect();
        chain.population.push(PopulationParams {
            mu_beta,
            sigma_beta,
            mu_alpha,
            sigma_alpha: [s11, s12, s12, s22],
            mu_tau_a,
            sigma2_tau_a,
            omega,
            ar: ArCoefs::new(phi),
        });
        let inds = (0..meta.ids.len())
            .map(|_| {
                let beta = BentCableCoefs::new(next(), next(), next());
                let (gamma, tau) = (next(), next());
                let population = if next() == 1.0 { Population::Gradual } else { Population::Abrupt };
                IndividualParams { beta, trans: TransitionCoefs::new(gamma, tau), population, sigma2: next() }
            })
            .collect();
        chain.individuals.push(inds);
    }
    if chain.is_empty() {
        return Err(bentcable_core::Error::EmptyChain.into());
    }
    Ok((chain, meta))
}
