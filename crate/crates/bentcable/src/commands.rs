//! The five commands, as library functions writing into an output directory.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bentcable_core::simulate::{self, FitConfig, ScenarioSpec, StudyReport};
use bentcable_core::summarize::{self, IndividualReport, PopulationReport};
use bentcable_core::{compute_dic, DicReport, LongitudinalDataset};
use serde::Serialize;
use serde_json::json;

use crate::config::{resolve_hyperparameters, Overrides, RunConfig};
use crate::draws::{read_chain, write_chain, CHAIN_FILE, DRAWS_FILE};
use crate::error::{CliError, Result};
use crate::io::{read_dataset, read_json, write_dataset, write_json, write_text};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::parallel;
use crate::svg::{self, Series};

pub const DATASET_FILE: &str = "dataset.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const CONFIG_FILE: &str = "config.json";
pub const HYPER_FILE: &str = "hyperparameters.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CURVES_FILE: &str = "curves.csv";
pub const CURVES_SVG: &str = "curves.svg";
pub const DIC_FILE: &str = "dic.json";
pub const RANKING_FILE: &str = "ranking.txt";
pub const STUDY_CSV: &str = "study.csv";
pub const STUDY_JSON: &str = "study.json";

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn time_range(ds: &LongitudinalDataset) -> [f64; 2] {
    let lo = ds.profiles().iter().map(|p| p.times[0]).fold(f64::INFINITY, f64::min);
    let hi = ds.profiles().iter().map(|p| p.times[p.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    [lo, hi]
}

fn outputs(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Built-in scenario name, or a path to a scenario JSON file.
pub fn load_scenario(name_or_path: &str, seed: Option<u64>) -> Result<ScenarioSpec> {
    let path = Path::new(name_or_path);
    let mut spec: ScenarioSpec = if path.is_file() { read_json(path)? } else { simulate::builtin_scenario(name_or_path)? };
    if let Some(s) = seed {
        spec.seed = s;
    }
    spec.validate()?;
    Ok(spec)
}

pub struct FitArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

/// Fit the model and write draws, chain diagnostics, the resolved
/// configuration and hyperparameters.
pub fn fit(args: &FitArgs) -> Result<()> {
    let started = Instant::now();
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    let ds = read_dataset(&args.data)?;
    let (hyper, warnings) = resolve_hyperparameters(&ds, cfg.p, &cfg)?;
    let pool = parallel::pool()?;
    let chain = parallel::run_chains(&pool, &ds, &hyper, &cfg.chain_settings(), cfg.chains)?;
    let dic = compute_dic(&chain, &ds)?;

    create_dir(&args.out)?;
    write_chain(&args.out, &chain, cfg.chains, time_range(&ds))?;
    write_json(&args.out.join(CONFIG_FILE), &cfg)?;
    write_json(&args.out.join(HYPER_FILE), &hyper)?;

    let mut m = RunManifest::new("fit", cfg.digest(), vec![cfg.seed], pool.current_num_threads());
    m.add_input(&args.data)?;
    if let Some(c) = &args.config {
        m.add_input(c)?;
    }
    m.outputs = outputs(&[DRAWS_FILE, CHAIN_FILE, CONFIG_FILE, HYPER_FILE]);
    m.warnings = warnings.iter().map(ToString::to_string).collect();
    m.diagnostics = json!({
        "chains": cfg.chains,
        "draws": chain.len(),
        "stationarity_proportion": chain.stationarity_proportion(),
        "mean_alpha_acceptance": chain.mean_alpha_acceptance(),
        "alpha_acceptance": chain.alpha_acceptance,
        "indicator_flips": chain.indicator_flips,
        "cholesky_failures": chain.cholesky_failures,
        "dic": dic,
    });
    m.finish(&args.out, started)
}

pub struct SimulateArgs {
    pub scenario: String,
    pub out: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Serialize)]
struct TruthRecord<'a> {
    spec: &'a ScenarioSpec,
    truth: &'a simulate::Truth,
}

/// Generate a dataset with its truth record.
pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let started = Instant::now();
    let spec = load_scenario(&args.scenario, args.seed)?;
    let (ds, truth) = simulate::generate(&spec)?;
    create_dir(&args.out)?;
    write_dataset(&args.out.join(DATASET_FILE), &ds)?;
    write_json(&args.out.join(TRUTH_FILE), &TruthRecord { spec: &spec, truth: &truth })?;
    let digest = crate::config::hex(&<sha2::Sha256 as sha2::Digest>::digest(serde_json::to_vec(&spec).expect("spec serializes")));
    let mut m = RunManifest::new("simulate", digest, vec![spec.seed], 1);
    let path = Path::new(&args.scenario);
    if path.is_file() {
        m.add_input(path)?;
    }
    m.outputs = outputs(&[DATASET_FILE, TRUTH_FILE]);
    m.diagnostics = json!({ "scenario": spec.name, "m": spec.m, "n": spec.n });
    m.finish(&args.out, started)
}

pub struct SummarizeArgs {
    pub chain_dir: PathBuf,
    /// Defaults to `<chain_dir>/summary`.
    pub out: Option<PathBuf>,
    /// Default to the fit's stored configuration.
    pub level: Option<f64>,
    pub grid_points: Option<usize>,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    population: &'a PopulationReport,
    individuals: &'a [IndividualReport],
}

/// Posterior summaries and fitted population curves of a stored chain.
pub fn summarize(args: &SummarizeArgs) -> Result<PathBuf> {
    let started = Instant::now();
    let (chain, meta) = read_chain(&args.chain_dir)?;
    // flags first, then the configuration stored by `fit`, then defaults
    let config_path = args.chain_dir.join(CONFIG_FILE);
    let stored = if config_path.is_file() { read_json::<RunConfig>(&config_path)? } else { RunConfig::default() };
    let level = args.level.unwrap_or(stored.level);
    if !(level > 0.0 && level < 1.0) {
        return Err(CliError::Config(format!("level must lie in (0, 1), got {level}")));
    }
    let points = args.grid_points.unwrap_or(stored.grid_points);
    if points < 2 {
        return Err(CliError::Config(format!("grid_points must be at least 2, got {points}")));
    }
    let population = summarize::summarize_population(&chain, level)?;
    let individuals = summarize::summarize_individuals(&chain, level)?;
    let [t0, t1] = meta.time_range;
    let grid: Vec<f64> = (0..points).map(|k| t0 + (t1 - t0) * k as f64 / (points - 1) as f64).collect();
    let curves = summarize::fitted_population(&chain, &grid, level)?;

    let out = args.out.clone().unwrap_or_else(|| args.chain_dir.join("summary"));
    create_dir(&out)?;
    write_json(&out.join(SUMMARY_FILE), &SummaryFile { population: &population, individuals: &individuals })?;
    let pct = format!("{}", (level * 100.0 * 1e6).round() / 1e6);
    let mut csv = format!("time,mean,lo{pct},hi{pct},population\n");
    let variant = chain.settings.variant;
    let mut series = Vec::new();
    for (name, band, keep, color) in [
        ("G", &curves.gradual, variant != bentcable_core::Variant::AOnly, "#1f77b4"),
        ("A", &curves.abrupt, variant != bentcable_core::Variant::GOnly, "#d62728"),
    ] {
        if !keep {
            continue;
        }
        for k in 0..band.times.len() {
            let _ = writeln!(csv, "{},{},{},{},{name}", band.times[k], band.mean[k], band.lower[k], band.upper[k]);
        }
        series.push(Series { label: if name == "G" { "Population G" } else { "Population A" }, band, color });
    }
    write_text(&out.join(CURVES_FILE), &csv)?;
    let title = format!("Fitted population curves ({pct}% pointwise bands)");
    write_text(&out.join(CURVES_SVG), &svg::render(&title, "time", "response", &series))?;

    let mut m = RunManifest::new("summarize", crate::config::hex(&[]), vec![meta.settings.seed], 1);
    m.add_input(&args.chain_dir.join(CHAIN_FILE))?;
    m.add_input(&args.chain_dir.join(DRAWS_FILE))?;
    m.outputs = outputs(&[SUMMARY_FILE, CURVES_FILE, CURVES_SVG]);
    m.diagnostics = json!({
        "level": level,
        "draws": chain.len(),
        "ctp_g_undefined_fraction": population.ctp_g_undefined_fraction,
    });
    m.finish(&out, started)?;
    Ok(out)
}

pub struct CompareArgs {
    pub data: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

pub fn ranking_table(ranked: &[DicReport]) -> String {
    let mut s = format!("{:>4}  {:>2}  {:<9}  {:>14}  {:>10}  {:>14}\n", "rank", "p", "variant", "DIC", "pD", "Dbar");
    for (k, r) in ranked.iter().enumerate() {
        let _ = writeln!(s, "{:>4}  {:>2}  {:<9}  {:>14.3}  {:>10.3}  {:>14.3}", k + 1, r.p, r.variant.name(), r.dic, r.p_d, r.dbar);
    }
    s
}

/// DIC comparison over AR orders and variants on the common random block;
/// the winner's full-data chain is written next to the ranking.
pub fn compare_dic(args: &CompareArgs) -> Result<String> {
    let started = Instant::now();
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    if cfg.p_list.is_empty() || cfg.variants.is_empty() {
        return Err(CliError::Config("need at least one AR order and one variant".into()));
    }
    let ds = read_dataset(&args.data)?;
    let p_max = *cfg.p_list.iter().max().expect("nonempty");
    if p_max >= ds.min_len() {
        return Err(CliError::Config(format!(
            "AR order {p_max} needs every profile to have more than {p_max} observations (shortest has {})",
            ds.min_len()
        )));
    }
    let (hyper, warnings) = resolve_hyperparameters(&ds, p_max, &cfg)?;
    let pool = parallel::pool()?;
    let cmp = parallel::compare_models(&pool, &ds, &hyper, &cfg.p_list, &cfg.variants, &cfg.chain_settings())?;
    let table = ranking_table(&cmp.ranked);

    create_dir(&args.out)?;
    write_json(&args.out.join(DIC_FILE), &cmp.ranked)?;
    write_text(&args.out.join(RANKING_FILE), &table)?;
    write_chain(&args.out, &cmp.winner, 1, time_range(&ds))?;
    write_json(&args.out.join(CONFIG_FILE), &cfg)?;
    let mut m = RunManifest::new("compare-dic", cfg.digest(), vec![cfg.seed], pool.current_num_threads());
    m.add_input(&args.data)?;
    if let Some(c) = &args.config {
        m.add_input(c)?;
    }
    m.outputs = outputs(&[DIC_FILE, RANKING_FILE, DRAWS_FILE, CHAIN_FILE, CONFIG_FILE]);
    m.warnings = warnings.iter().map(ToString::to_string).collect();
    let best = &cmp.ranked[0];
    m.diagnostics = json!({ "winner": { "p": best.p, "variant": best.variant }, "fits": cmp.ranked.len() });
    m.finish(&args.out, started)?;
    Ok(table)
}

pub struct StudyArgs {
    pub scenario: String,
    pub replicates: usize,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub overrides: Overrides,
}

/// Simulation study: `replicates` datasets with seeds `seed + r`, each fitted
/// and scored against the truth.
pub fn replicate_study(args: &StudyArgs) -> Result<StudyReport> {
    let started = Instant::now();
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    let spec = load_scenario(&args.scenario, args.overrides.seed)?;
    let fit = FitConfig { p: cfg.p, variant: cfg.variant, settings: cfg.chain_settings(), level: cfg.level };
    let pool = parallel::pool()?;
    let report = parallel::replicate_study(&pool, &spec, &fit, args.replicates)?;

    create_dir(&args.out)?;
    let mut csv = String::from("parameter,truth,avg_mean,avg_median,coverage,replicates\n");
    for r in &report.rows {
        let _ = writeln!(csv, "{},{},{},{},{},{}", r.name, r.truth, r.avg_mean, r.avg_median, r.coverage, r.replicates);
    }
    write_text(&args.out.join(STUDY_CSV), &csv)?;
    write_json(&args.out.join(STUDY_JSON), &report)?;
    let seeds = (1..=args.replicates as u64).map(|r| spec.seed.wrapping_add(r)).collect();
    let mut m = RunManifest::new("replicate-study", cfg.digest(), seeds, pool.current_num_threads());
    if let Some(c) = &args.config {
        m.add_input(c)?;
    }
    m.outputs = outputs(&[STUDY_CSV, STUDY_JSON]);
    m.diagnostics = json!({
        "scenario": spec.name,
        "requested": report.requested,
        "failed": report.failed,
    });
    m.finish(&args.out, started)?;
    Ok(report)
}

/// Name of the manifest every command writes.
pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join(MANIFEST_FILE)
}
