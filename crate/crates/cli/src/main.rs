use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sto_cli::config::{parse_config_with_base, ExperimentConfig};
use sto_cli::presets::{describe, preset, PRESET_NAMES};
use sto_cli::scenario::{emit_plot_data, run_scenario, CliError, Command, Plan};
use sto_cli::{ConfigError, ErrorCode};

/// Self-consistent transfer operators for graphon-coupled circle maps.
///
/// Exit codes: 0 all verdicts pass, 2 configuration error, 3 numerical
/// failure, 4 probe failure, 1 other errors.
#[derive(Parser, Debug)]
#[command(name = "sto", version)]
struct Cli {
    /// Configuration file (sectioned key = value, or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a built-in scenario; a --config file is applied on top.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Worker threads; affects wall-clock time only.
    #[arg(long, global = true, env = "STO_THREADS")]
    threads: Option<usize>,
    /// Output directory (default: `output.dir` from the config, else `sto-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Validate the configuration and print the execution plan.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Abort with exit code 3 on a non-expanding fiber.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Solve for the fixed point and run the configured probes.
    FixedPoint,
    /// Simulate the finite network ensemble and measure concentration.
    Simulate,
    /// Compare finite-N marginals with the operator (convergence sweep).
    Compare,
    /// Run a single probe.
    Probe { name: String },
    /// List the built-in scenarios.
    Presets,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, ConfigError> {
    let base = match &cli.preset {
        Some(name) => preset(name).ok_or_else(|| ConfigError {
            code: ErrorCode::UnresolvableName,
            line: None,
            key: Some("--preset".into()),
            message: format!(
                "unknown preset `{name}`; known: {}",
                PRESET_NAMES.join(", ")
            ),
        })?,
        None => ExperimentConfig::default(),
    };
    let mut cfg = match &cli.config {
        Some(path) => parse_config_with_base(path, base)?,
        None => base,
    };
    if cli.strict {
        cfg.strict = true;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let command = match &cli.command {
        Cmd::Presets => {
            for name in PRESET_NAMES {
                println!("{name:<10} {}", describe(name).unwrap_or(""));
            }
            return Ok(0);
        }
        Cmd::FixedPoint => Command::FixedPoint,
        Cmd::Simulate => Command::Simulate,
        Cmd::Compare => Command::Compare,
        Cmd::Probe { name } => Command::Probe(name.clone()),
    };
    let cfg = load(cli)?;
    let plan = Plan::new(command, &cfg)?;
    if cli.dry_run {
        print!("{}", plan.describe(&cfg));
        return Ok(0);
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("sto-out"));
    let outcome = run_scenario(&cfg, &plan)?;
    for w in &outcome.report.warnings {
        eprintln!("warning: {w}");
    }
    emit_plot_data(&outcome, &out)?;
    for p in outcome.report.probes.values() {
        println!(
            "{:<14} {:<7} statistic {} threshold {:e}",
            p.name,
            format!("{:?}", p.verdict).to_lowercase(),
            p.statistic.map_or("none".to_string(), |s| format!("{s:e}")),
            p.threshold
        );
    }
    println!("report: {}", out.join("report.json").display());
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
