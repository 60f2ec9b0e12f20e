//! `reentry`: runs scenarios, writes trace logs and prints verifier reports.
//!
//! Exit codes: 0 ok, 1 usage, 2 config, 3 internal invariant breach.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::thread;

use clap::{Parser, ValueEnum};
use reentry_core::config::{self, ConfigError, SuiteSpec};
use reentry_core::policy::{EnforcementConfig, GuardMode};
use reentry_core::report::{
    emit_capability_matrix, machine_record, render_capability_matrix, render_table, ReportError,
};
use reentry_core::sim::{run_scenario, Permissions, Scenario, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Table,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "reentry", version, about = "Run re-entry scenarios and verify their traces")]
struct Cli {
    /// Bundled scenario name or path to a scenario file.
    #[arg(long)]
    scenario: Option<String>,

    /// `all`, `none`, or a comma list of rtw,seal,memgate,attenuation.
    #[arg(long)]
    enforce: Option<EnforcementConfig>,

    /// What attenuation does with a contaminated agent's high-risk action.
    #[arg(long, value_name = "deny|approve")]
    guard: Option<GuardMode>,

    #[arg(long)]
    seed: Option<u64>,

    /// Override the scenario's max_ticks.
    #[arg(long)]
    ticks: Option<u64>,

    /// Write the trace log of a single run here.
    #[arg(long, value_name = "FILE")]
    trace_out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    report: ReportFormat,

    /// Persistence and propagation under each permission set.
    #[arg(long, conflicts_with_all = ["suite", "trace_out"])]
    capability_matrix: bool,

    /// Suite file, or `bundled` for every bundled scenario with and without
    /// enforcement.
    #[arg(long, value_name = "FILE|bundled", conflicts_with_all = ["scenario", "trace_out"])]
    suite: Option<String>,

    /// List bundled scenarios.
    #[arg(long, exclusive = true)]
    list: bool,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("malformed run record: {0}")]
    Report(#[from] ReportError),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) | CliError::Write { .. } => 2,
            CliError::Sim(e) if !e.is_internal() => 2,
            CliError::Sim(_) | CliError::Report(_) => 3,
        }
    }
}

impl Cli {
    fn apply(&self, mut s: Scenario) -> Result<Scenario, CliError> {
        if let Some(e) = self.enforce {
            s.enforcement = e.with_guard(s.enforcement.guard_mode);
        }
        if let Some(g) = self.guard {
            s.enforcement = s.enforcement.with_guard(g);
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(t) = self.ticks {
            s.max_ticks = t;
        }
        s.validate().map_err(ConfigError::from)?;
        Ok(s)
    }

    fn emit(&self, records: &str) -> Result<String, CliError> {
        match self.report {
            ReportFormat::Machine => Ok(records.to_string()),
            ReportFormat::Table => Ok(render_table(records)?),
        }
    }
}

fn run_one(cli: &Cli, name: &str) -> Result<String, CliError> {
    let scenario = cli.apply(config::resolve_scenario(name)?)?;
    let (trace, report) = run_scenario(&scenario)?;
    if let Some(path) = &cli.trace_out {
        fs::write(path, trace.to_log()).map_err(|source| CliError::Write {
            path: path.display().to_string(),
            source,
        })?;
    }
    cli.emit(&machine_record(&scenario, &report))
}

fn run_suite(cli: &Cli, spec: &str) -> Result<String, CliError> {
    let spec = if spec == "bundled" {
        SuiteSpec::bundled()
    } else {
        let text = fs::read_to_string(spec).map_err(|source| ConfigError::Io {
            path: spec.to_string(),
            source,
        })?;
        SuiteSpec::parse(&text)?
    };
    let scenarios = spec
        .expand()?
        .into_iter()
        .map(|s| cli.apply(s))
        .collect::<Result<Vec<_>, _>>()?;

    let workers = thread::available_parallelism().map_or(1, |n| n.get());
    let chunk = scenarios.len().div_ceil(workers).max(1);
    let records: Vec<Result<String, SimError>> = thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|s| run_scenario(s).map(|(_, r)| machine_record(s, &r)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("suite worker panicked"))
            .collect()
    });
    let mut all = String::new();
    for r in records {
        all.push_str(&r?);
    }
    cli.emit(&all)
}

fn run_matrix(cli: &Cli) -> Result<String, CliError> {
    let name = cli.scenario.as_deref().unwrap_or("capability-matrix");
    let mut base = cli.apply(config::resolve_scenario(name)?)?;
    if cli.enforce.is_none() {
        base.enforcement = EnforcementConfig::none().with_guard(base.enforcement.guard_mode);
    }
    let rows = emit_capability_matrix(&base, Permissions::ALL)?;
    Ok(match cli.report {
        ReportFormat::Table => render_capability_matrix(&rows),
        ReportFormat::Machine => rows
            .iter()
            .map(|r| {
                format!(
                    "permissions={}|persistence={}|propagation={}\n",
                    r.permissions,
                    u8::from(r.persistence),
                    u8::from(r.propagation)
                )
            })
            .collect(),
    })
}

fn run(cli: &Cli) -> Result<String, CliError> {
    if cli.list {
        return Ok(config::BUNDLED.iter().map(|(n, _)| format!("{n}\n")).collect());
    }
    if cli.capability_matrix {
        return run_matrix(cli);
    }
    if let Some(spec) = &cli.suite {
        return run_suite(cli, spec);
    }
    match &cli.scenario {
        Some(name) => run_one(cli, name),
        None => Err(CliError::Usage(
            "one of --scenario, --suite, --capability-matrix or --list is required".into(),
        )),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
