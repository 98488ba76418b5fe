use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mcmi_sim::scenario::parse_duration_ms;
use mcmi_sim::trace::{audit_file, AuditError, AuditOptions};
use mcmi_sim::{build_and_run, ScenarioConfig};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_VIOLATIONS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "mcmi-sim",
    version,
    about = "Multi-channel, multi-interface Hello beaconing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SummaryFormat {
    Text,
    JsonLines,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Simulated duration, e.g. `30s` or `1500ms` (bare numbers are ms).
        #[arg(long, value_parser = parse_duration_ms)]
        duration: Option<u64>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        summary: SummaryFormat,
    },
    /// Check a scenario file without running it.
    Validate { scenario: PathBuf },
    /// Check a trace file for reception-rule violations.
    Audit {
        trace: PathBuf,
        /// Scenario that produced the trace; enables the per-firing
        /// interface replication check.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::from_path(path).map_err(|e| {
        eprintln!("error: {}: {}", path.display(), e);
        ExitCode::from(EXIT_CONFIG)
    })
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            duration,
            trace,
            summary,
        } => {
            let mut cfg = load(&scenario)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            if let Some(ms) = duration {
                cfg.duration_ms = ms;
            }
            if trace.is_some() {
                cfg.trace_path = trace;
            }
            let result = build_and_run(cfg).map_err(|e| {
                eprintln!("error: {}", e);
                ExitCode::from(EXIT_RUNTIME)
            })?;
            let out = std::io::stdout().lock();
            let written = match summary {
                SummaryFormat::Text => result.write_text(out),
                SummaryFormat::JsonLines => result.write_json_lines(out),
            };
            written.map_err(|e| {
                eprintln!("error: writing summary: {}", e);
                ExitCode::from(EXIT_RUNTIME)
            })
        }
        Command::Validate { scenario } => {
            let cfg = load(&scenario)?;
            println!(
                "ok: {} nodes, {} interfaces, {} channels, policy {}",
                cfg.num_nodes,
                cfg.num_interfaces,
                cfg.num_channels,
                cfg.policy.name()
            );
            Ok(())
        }
        Command::Audit { trace, scenario } => {
            let mut opts = AuditOptions::default();
            if let Some(path) = scenario {
                let cfg = load(&path)?;
                opts = AuditOptions {
                    expected_interfaces: Some(cfg.num_interfaces),
                    hello_airtime: cfg.hello_airtime(),
                    horizon: Some(cfg.duration()),
                };
            }
            let report = audit_file(&trace, &opts).map_err(|e| {
                eprintln!("error: {}: {}", trace.display(), e);
                match e {
                    AuditError::Malformed { .. } => ExitCode::from(EXIT_CONFIG),
                    AuditError::Io(_) => ExitCode::from(EXIT_RUNTIME),
                }
            })?;
            for v in &report.violations {
                println!("{}", v);
            }
            println!(
                "{} lines: {} sends, {} receives, {} drops, {} tunes, {} hello firings ({} truncated); {} violations",
                report.lines,
                report.sends,
                report.receives,
                report.drops,
                report.tunes,
                report.hello_firings,
                report.truncated_firings,
                report.violations.len()
            );
            if report.is_clean() {
                Ok(())
            } else {
                Err(ExitCode::from(EXIT_VIOLATIONS))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
