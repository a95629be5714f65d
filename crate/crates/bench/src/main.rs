use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fviot_bench::{parse_pairs, run_experiment, write_csv, BenchError, ExperimentConfig, Method};

/// Bicausal transport between Gaussian random walks: solvers against the closed form.
#[derive(Debug, Parser)]
#[command(name = "fviot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form values only.
    Oracle(RunArgs),
    /// Backward LP on binomial scenario trees.
    TreeLp(RunArgs),
    /// Nested entropic backward induction on scenario trees.
    AdaptedSinkhorn(RunArgs),
    /// Fitted value iteration.
    Fvi(RunArgs),
    /// Runs the method named in the config over its horizon list.
    Bench(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set T=1,2,3` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per horizon.
    #[arg(long)]
    reps: Option<usize>,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Log per-step progress (FVI losses) to stderr.
    #[arg(long, short)]
    verbose: bool,
}

fn build_config(method: Option<Method>, args: &RunArgs) -> Result<ExperimentConfig, BenchError> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| BenchError::Io { path: path.clone(), source })?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    for item in &args.set {
        pairs.extend(parse_pairs(item)?);
    }
    if let Some(m) = method {
        pairs.push(("method".into(), m.name().into()));
    }
    if let Some(seed) = args.seed {
        pairs.push(("seed".into(), seed.to_string()));
    }
    if let Some(reps) = args.reps {
        pairs.push(("R".into(), reps.to_string()));
    }
    if let Some(out) = &args.out {
        pairs.push(("out".into(), out.display().to_string()));
    }
    Ok(ExperimentConfig::from_pairs(&pairs)?)
}

fn run(method: Option<Method>, args: &RunArgs) -> Result<(), BenchError> {
    let config = build_config(method, args)?;
    let report = run_experiment(&config)?;
    match &config.out {
        Some(path) => write_csv(&report, path),
        None => {
            print!("{}", report.to_csv_string());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (method, args) = match &cli.command {
        Command::Oracle(a) => (Some(Method::Oracle), a),
        Command::TreeLp(a) => (Some(Method::TreeLp), a),
        Command::AdaptedSinkhorn(a) => (Some(Method::AdaptedSinkhorn), a),
        Command::Fvi(a) => (Some(Method::Fvi), a),
        Command::Bench(a) => (None, a),
    };
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(method, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let mut shown = e.to_string();
            eprintln!("fviot: {shown}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                let text = s.to_string();
                if !shown.contains(&text) {
                    eprintln!("  caused by: {text}");
                }
                shown = text;
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
