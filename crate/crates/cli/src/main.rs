use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::Value;

use vtsi_core::harness::{apply_override, run_to_dir, DiagnosticReport, Scenario};
use vtsi_core::Error;

/// Vehicle–bridge interaction simulations on curved bridges.
#[derive(Parser)]
#[command(name = "vtsi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write timehistory.csv and report.json.
    Run {
        #[command(flatten)]
        input: Input,
        /// Output directory.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Validate a scenario without running it.
    Check {
        #[command(flatten)]
        input: Input,
    },
    /// Run one scenario per value of a parameter, in parallel.
    Sweep {
        #[command(flatten)]
        input: Input,
        /// Dotted scenario key, e.g. run.dt.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Parent directory for the per-value outputs.
        #[arg(short, long, default_value = "sweep")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Override a scenario key, e.g. --set run.strategy=B (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn invalid(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    fn from_run(e: Error) -> Self {
        match e {
            Error::Scenario { .. } | Error::Parse(_) => Self::invalid(e.to_string()),
            other => Self { code: 2, message: other.to_string() },
        }
    }
}

fn read_value(input: &Input) -> Result<Value, Failure> {
    let text = std::fs::read_to_string(&input.scenario).map_err(|e| Failure::invalid(format!("{}: {e}", input.scenario.display())))?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", input.scenario.display())))?;
    for item in &input.overrides {
        let (key, raw) = item.split_once('=').ok_or_else(|| Failure::invalid(format!("override `{item}` is not KEY=VALUE")))?;
        apply_override(&mut value, key, raw).map_err(|e| Failure::invalid(e.to_string()))?;
    }
    Ok(value)
}

fn scenario_from(value: Value) -> Result<Scenario, Failure> {
    Scenario::from_value(value).map_err(|e| Failure::invalid(e.to_string()))
}

fn summary(report: &DiagnosticReport) -> String {
    let oi = |name: &str| report.oscillation_indices.get(name).copied().unwrap_or(f64::NAN);
    format!(
        "steps {} | osc wheel_acc_b {:.4e} lam_y {:.4e} lam_z {:.4e} | max residual {:.2e}/{:.2e}/{:.2e} | condition {:.3e}",
        report.steps,
        oi("wheel_acc_b"),
        oi("lam_y"),
        oi("lam_z"),
        report.max_relative_residuals.displacement,
        report.max_relative_residuals.velocity,
        report.max_relative_residuals.acceleration,
        report.max_condition,
    )
}

fn dir_name(param: &str, value: &str) -> String {
    format!("{param}={value}").chars().map(|c| if c == '/' || c == '\\' { '_' } else { c }).collect()
}

fn sweep(input: &Input, param: &str, values: &[String], out: &Path) -> Result<(), Failure> {
    let base = read_value(input)?;
    let scenarios = values
        .iter()
        .map(|v| {
            let mut value = base.clone();
            apply_override(&mut value, param, v).map_err(|e| Failure::invalid(e.to_string()))?;
            Ok((v.clone(), scenario_from(value)?))
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let results: Vec<_> = scenarios
        .par_iter()
        .map(|(v, s)| {
            let dir = out.join(dir_name(param, v));
            (v, dir.clone(), run_to_dir(s, &dir))
        })
        .collect();
    let mut worst = None;
    for (v, dir, result) in results {
        match result {
            Ok(report) => println!("{param}={v}: {} -> {}", summary(&report), dir.display()),
            Err(e) => {
                let f = Failure::from_run(e);
                eprintln!("{param}={v}: {}", f.message);
                worst = Some(worst.map_or(f.code, |w: u8| w.max(f.code)));
            }
        }
    }
    match worst {
        Some(code) => Err(Failure { code, message: "some sweep runs failed".into() }),
        None => Ok(()),
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { input, out } => {
            let scenario = scenario_from(read_value(&input)?)?;
            let report = run_to_dir(&scenario, &out).map_err(Failure::from_run)?;
            println!("{}", summary(&report));
            Ok(())
        }
        Command::Check { input } => {
            let scenario = scenario_from(read_value(&input)?)?;
            println!("ok: {} m path, horizon {} s, dt {} s", scenario.path_length(), scenario.horizon(), scenario.run.dt);
            Ok(())
        }
        Command::Sweep { input, param, values, out } => sweep(&input, &param, &values, &out),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
