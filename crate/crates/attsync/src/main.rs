use clap::{Parser, Subcommand};

use attsync::control;
use attsync::scenario::config::{self, ScenarioFile};
use attsync::scenario::{builtin, load_scenario, run, sweep, ScenarioError};
use attsync::sim::SimError;

use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "attsync",
    version,
    about = "Attitude synchronization simulator and analyzer",
    after_help = "Exit codes: 0 success/guaranteed, 1 completed with caveat, \
                  2 configuration error, 3 domain violation.\n\
                  Set ATTSYNC_LOG=info or ATTSYNC_LOG=debug for stderr detail."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a scenario and print its guarantee report as JSON
    Check {
        /// Scenario file; omit when using --builtin
        config: Option<PathBuf>,
        /// Name of a compiled-in scenario
        #[arg(long, value_name = "NAME")]
        builtin: Option<String>,
    },
    /// Simulate a scenario and write trajectory, channel, and diagnostic artifacts
    Run {
        /// Scenario file; omit when using --builtin
        config: Option<PathBuf>,
        /// Name of a compiled-in scenario
        #[arg(long, value_name = "NAME")]
        builtin: Option<String>,
        /// Directory for trajectory.csv, channels.csv, diagnostics.json, guarantees.json
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun a scenario over randomized initial conditions and summarize
    Sweep {
        /// Scenario file; omit when using --builtin
        config: Option<PathBuf>,
        /// Name of a compiled-in scenario
        #[arg(long, value_name = "NAME")]
        builtin: Option<String>,
        /// Directory for sweep.json
        #[arg(long)]
        out: PathBuf,
        /// Number of randomized trials
        #[arg(long)]
        trials: usize,
        /// Largest initial attitude norm drawn per agent
        #[arg(long = "max-norm")]
        max_norm: f64,
    },
}

#[derive(Clone, Copy)]
struct Log(u8);

impl Log {
    fn from_env() -> Self {
        Log(match std::env::var("ATTSYNC_LOG").as_deref() {
            Ok("debug") => 2,
            Ok("info") => 1,
            _ => 0,
        })
    }

    fn info(&self, msg: &str) {
        if self.0 >= 1 {
            eprintln!("info: {msg}");
        }
    }

    fn debug(&self, msg: &str) {
        if self.0 >= 2 {
            eprintln!("debug: {msg}");
        }
    }
}

/// 2 for configuration problems, 3 when the state left the valid region.
fn error_exit(e: &ScenarioError) -> i32 {
    match e {
        ScenarioError::Sim(SimError::OutOfDomain { .. }) => 3,
        _ => 2,
    }
}

fn resolve(
    config: Option<PathBuf>,
    builtin_name: Option<String>,
    log: Log,
) -> Result<ScenarioFile, i32> {
    let file = match (config, builtin_name) {
        (Some(path), None) => load_scenario(&path).map_err(|e| {
            eprintln!("error: {}: {e}", path.display());
            error_exit(&e)
        })?,
        (None, Some(name)) => builtin(&name).map_err(|e| {
            eprintln!("error: {e}");
            eprintln!(
                "available builtins: {}",
                builtin::builtin_names().join(", ")
            );
            2
        })?,
        _ => {
            eprintln!("error: provide either a scenario file or --builtin NAME, not both");
            return Err(2);
        }
    };
    log.info(&format!(
        "scenario '{}': {} agents, {} edges, protocol {}",
        file.name,
        file.agents.len(),
        file.edges.len(),
        file.protocol
    ));
    Ok(file)
}

fn compile(file: &ScenarioFile) -> Result<config::CompiledScenario, i32> {
    config::compile(file).map_err(|e| {
        eprintln!("error: {e}");
        error_exit(&e)
    })
}

fn cmd_check(config: Option<PathBuf>, builtin_name: Option<String>, log: Log) -> i32 {
    let file = match resolve(config, builtin_name, log) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let sc = match compile(&file) {
        Ok(sc) => sc,
        Err(code) => return code,
    };
    let report = match control::validate_guarantees(&sc.config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("serializable")
    );
    if report.finite_time {
        0
    } else {
        1
    }
}

fn cmd_run(config: Option<PathBuf>, builtin_name: Option<String>, out: PathBuf, log: Log) -> i32 {
    let file = match resolve(config, builtin_name, log) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let sc = match compile(&file) {
        Ok(sc) => sc,
        Err(code) => return code,
    };
    let output = match run::run_scenario(&sc) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    for event in &output.diagnostics.events {
        log.debug(&format!("event {} at t = {}", event.kind, event.t));
    }
    let artifacts = match run::write_artifacts(&out, &output) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: writing artifacts to {}: {e}", out.display());
            return 2;
        }
    };
    log.info(&format!("wrote {}", artifacts.trajectory.display()));
    log.info(&format!("wrote {}", artifacts.channels.display()));
    log.info(&format!("wrote {}", artifacts.diagnostics.display()));
    log.info(&format!("wrote {}", artifacts.guarantees.display()));
    println!(
        "{}: {} ({} samples to t = {})",
        output.name,
        output.diagnostics.classification.label,
        output.diagnostics.samples,
        output.diagnostics.end_time
    );
    for caveat in &output.diagnostics.caveats {
        println!("caveat: {caveat}");
    }
    output.exit_code()
}

fn cmd_sweep(
    config: Option<PathBuf>,
    builtin_name: Option<String>,
    out: PathBuf,
    trials: usize,
    max_norm: f64,
    log: Log,
) -> i32 {
    let file = match resolve(config, builtin_name, log) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let sc = match compile(&file) {
        Ok(sc) => sc,
        Err(code) => return code,
    };
    let summary = match sweep::run_sweep(&sc, &sweep::SweepOptions { trials, max_norm }) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return error_exit(&e);
        }
    };
    for record in &summary.trial_records {
        log.debug(&format!(
            "trial {}: {} invariance_excess={} rise={}",
            record.trial, record.classification, record.invariance_excess, record.monotonicity_rise
        ));
    }
    let path = match sweep::write_summary(&out, &summary) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: writing summary to {}: {e}", out.display());
            return 2;
        }
    };
    log.info(&format!("wrote {}", path.display()));
    println!(
        "{}: {} trials, invariance {:.3}, monotone {:.3}, finite-time {:.3}, pass={}",
        summary.scenario,
        summary.trials,
        summary.invariance_fraction,
        summary.monotonicity_fraction,
        summary.finite_time_fraction,
        summary.pass
    );
    summary.exit_code()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = Log::from_env();
    let code = match cli.command {
        Command::Check { config, builtin } => cmd_check(config, builtin, log),
        Command::Run {
            config,
            builtin,
            out,
        } => cmd_run(config, builtin, out, log),
        Command::Sweep {
            config,
            builtin,
            out,
            trials,
            max_norm,
        } => cmd_sweep(config, builtin, out, trials, max_norm, log),
    };
    ExitCode::from(code as u8)
}
