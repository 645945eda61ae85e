use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use lrwsim::{preset, run, CliError, ConfigError, ScenarioConfig, SEED_ENV};

/// Run LRW simulation scenarios and write CSV tables.
#[derive(Debug, Parser)]
#[command(name = "lrwsim", version)]
struct Args {
    /// Scenario config file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in scenario: fig5, table2, table3, inf_timeout, consensus2.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Master seed; falls back to LRWSIM_SEED, then to the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Trials per sweep point.
    #[arg(long, value_name = "N")]
    trials: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "results")]
    out: PathBuf,
    /// Also write every trial's trace to trace.csv.
    #[arg(long)]
    emit_trace: bool,
    /// Also write duration histograms.
    #[arg(long)]
    emit_histogram: bool,
}

fn load(args: &Args) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match (&args.scenario, &args.preset) {
        (Some(path), _) => ScenarioConfig::load(path)?,
        (None, Some(name)) => preset(name)?,
        (None, None) => {
            return Err(ConfigError::invalid("cli", "scenario", "pass --scenario PATH or --preset NAME").into())
        }
    };
    let env_seed = match std::env::var(SEED_ENV) {
        Ok(v) => Some(
            v.trim()
                .parse::<u64>()
                .map_err(|e| ConfigError::invalid("env", SEED_ENV, e.to_string()))?,
        ),
        Err(_) => None,
    };
    if let Some(seed) = args.seed.or(env_seed) {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    cfg.output.emit_trace |= args.emit_trace;
    cfg.output.emit_histogram |= args.emit_histogram;
    cfg.validate()?;
    Ok(cfg)
}

fn execute(args: &Args) -> Result<(), CliError> {
    let cfg = load(args)?;
    let report = run(&cfg)?;
    report.write_to(&args.out)?;
    match report.violations.first() {
        Some(first) => Err(CliError::Audit(report.violations.len(), first.clone())),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(args) => args,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("lrwsim: error[usage]: {}", e.kind());
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lrwsim: error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
