use std::path::PathBuf;
use std::process::ExitCode;

use bentcable::commands::{self, CompareArgs, FitArgs, SimulateArgs, StudyArgs, SummarizeArgs};
use bentcable::config::Overrides;
use bentcable::core::Variant;
use bentcable::{CliError, Result, EXIT_FAILURE};
use clap::{Args, Parser, Subcommand};

/// Bayesian flexible mixture bent-cable regression for longitudinal data.
#[derive(Parser)]
#[command(name = "bentcable", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct ChainFlags {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
}

impl ChainFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            chains: self.chains,
            iters: self.iters,
            burnin: self.burnin,
            thin: self.thin,
            ..Overrides::default()
        }
    }
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| format!("unknown variant {s:?}; expected flexible, g-only or a-only"))
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model to a CSV dataset (columns id, time, y).
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// AR order of the within-individual errors.
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[command(flatten)]
        chain: ChainFlags,
    },
    /// Generate a dataset from a built-in scenario or a scenario JSON file.
    Simulate {
        /// Built-in name (S1a, S1b, S2, S3) or path to a JSON scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Posterior summaries and population curves from a fit directory.
    Summarize {
        /// Directory written by `fit` or `compare-dic`.
        chain_dir: PathBuf,
        /// Defaults to `<chain_dir>/summary`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Credible level of intervals and bands.
        #[arg(long)]
        level: Option<f64>,
        #[arg(long)]
        grid_points: Option<usize>,
    },
    /// Rank AR orders and model variants by DIC.
    CompareDic {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// AR orders to compare, comma separated.
        #[arg(long, value_delimiter = ',')]
        p: Option<Vec<usize>>,
        /// Variants to compare, comma separated.
        #[arg(long, value_delimiter = ',', value_parser = parse_variant)]
        variants: Option<Vec<Variant>>,
        #[command(flatten)]
        chain: ChainFlags,
    },
    /// Repeated simulate-and-fit study reporting average estimates and coverage.
    ReplicateStudy {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        replicates: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
        #[command(flatten)]
        chain: ChainFlags,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit { data, out, p, variant, chain } => {
            let overrides = Overrides { p, variant, ..chain.overrides() };
            commands::fit(&FitArgs { data, config: chain.config, out, overrides })
        }
        Command::Simulate { scenario, out, seed } => commands::simulate(&SimulateArgs { scenario, out, seed }),
        Command::Summarize { chain_dir, out, level, grid_points } => {
            let dir = commands::summarize(&SummarizeArgs { chain_dir, out, level, grid_points })?;
            println!("{}", dir.display());
            Ok(())
        }
        Command::CompareDic { data, out, p, variants, chain } => {
            let overrides = Overrides { p_list: p, variants, ..chain.overrides() };
            let table = commands::compare_dic(&CompareArgs { data, config: chain.config, out, overrides })?;
            print!("{table}");
            Ok(())
        }
        Command::ReplicateStudy { scenario, replicates, out, p, variant, chain } => {
            if replicates == 0 {
                return Err(CliError::Usage("--replicates must be at least 1".into()));
            }
            let overrides = Overrides { p, variant, ..chain.overrides() };
            let report = commands::replicate_study(&StudyArgs { scenario, replicates, config: chain.config, out, overrides })?;
            println!("{} of {} replicates fitted", report.requested - report.failed, report.requested);
            Ok(())
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(EXIT_FAILURE as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_owned())),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}
