//! Command-line experiment runner.
//!
//! Subcommands mirror the experiment kinds: `gen-env` writes an environment
//! snapshot, `run-selection` / `run-bandit` / `run-refine` execute a config
//! into CSV outputs plus a manifest, and `verify` runs the named acceptance
//! checks. Exit codes: 0 on success, 1 when a check or run fails, 2 on
//! configuration errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use passlab_core::harness::{self, ExperimentConfig, ExperimentKind};
use passlab_core::select::Heuristic;
use passlab_core::verify;
use passlab_core::Error;

#[derive(Parser)]
#[command(
    name = "passlab",
    version,
    about = "Deterministic lab for execution-based program selection and test-driven bandit refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config's `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated seed list (overrides the config's `seeds`).
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads (overrides the config's `parallel`).
    #[arg(long)]
    parallel: Option<usize>,
    /// Comma-separated heuristic list, case-insensitive (selection only).
    #[arg(long)]
    heuristics: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an environment snapshot (algorithm, description, batch) from a
    /// selection config.
    GenEnv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a selection experiment.
    RunSelection(RunArgs),
    /// Run a bandit experiment.
    RunBandit(RunArgs),
    /// Run a refinement experiment.
    RunRefine(RunArgs),
    /// Run the named acceptance checks.
    Verify {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Also write the results as CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_seeds(text: &str) -> Result<Vec<u64>, Error> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::InvalidConfig(format!("seeds: '{s}' is not an integer")))
        })
        .collect()
}

fn parse_heuristics(text: &str) -> Result<Vec<Heuristic>, Error> {
    text.split(',').map(Heuristic::from_str).collect()
}

fn load_config(args: &RunArgs, expected: ExperimentKind) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.kind != expected {
        return Err(Error::InvalidConfig(format!(
            "config kind {:?} does not match the subcommand (expected {expected:?})",
            config.kind
        )));
    }
    if let Some(seeds) = &args.seeds {
        config.seeds = parse_seeds(seeds)?;
    }
    if let Some(parallel) = args.parallel {
        config.parallel = Some(parallel);
    }
    if let Some(heuristics) = &args.heuristics {
        match config.selection.as_mut() {
            Some(params) => params.heuristics = parse_heuristics(heuristics)?,
            None => {
                return Err(Error::InvalidConfig(
                    "--heuristics applies to selection configs only".into(),
                ))
            }
        }
    }
    config.validate()?;
    Ok(config)
}

fn execute_run(args: &RunArgs, expected: ExperimentKind) -> Result<(), Error> {
    let config = load_config(args, expected)?;
    let outcome = harness::run(&config, args.out.as_deref())?;
    for output in &outcome.manifest.outputs {
        println!("wrote {}", output.display());
    }
    println!(
        "config {} done in {} ms",
        &outcome.manifest.config_hash[..12],
        outcome.manifest.wall_clock_ms
    );
    Ok(())
}

fn write_verify_csv(dir: &PathBuf, outcomes: &[verify::CheckOutcome]) -> Result<PathBuf, Error> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join("verify.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["check", "passed", "elapsed_ms", "details"])?;
    for o in outcomes {
        w.write_record([
            o.name.to_string(),
            (o.passed as u8).to_string(),
            o.elapsed_ms.to_string(),
            o.details.clone(),
        ])?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(path)
}

fn execute_verify(filter: Option<&str>, out: Option<&PathBuf>) -> Result<bool, Error> {
    let outcomes = verify::run_checks(filter)?;
    let mut all_passed = true;
    for o in &outcomes {
        println!(
            "{:<20} {}  [{} ms]  {}",
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.elapsed_ms,
            o.details
        );
        all_passed &= o.passed;
    }
    if let Some(dir) = out {
        let path = write_verify_csv(dir, &outcomes)?;
        println!("wrote {}", path.display());
    }
    Ok(all_passed)
}

fn dispatch(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::GenEnv { config, out } => {
            let config = ExperimentConfig::load(&config)?;
            let path = harness::write_snapshot(&config, &out)?;
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::RunSelection(args) => {
            execute_run(&args, ExperimentKind::Selection)?;
            Ok(true)
        }
        Command::RunBandit(args) => {
            execute_run(&args, ExperimentKind::Bandit)?;
            Ok(true)
        }
        Command::RunRefine(args) => {
            execute_run(&args, ExperimentKind::Refinement)?;
            Ok(true)
        }
        Command::Verify { filter, out } => execute_verify(filter.as_deref(), out.as_ref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::InvalidConfig(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
