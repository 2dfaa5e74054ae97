//! Command-line entry point: simulate, run, compute, report, compare.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use servwatt_core::energy::AttributionMode;
use servwatt_core::experiment::{
    self, build_comparison, load_archive, plan_runs, run_experiment, ExperimentError,
    ExperimentSpec,
};
use servwatt_core::ingest::NetworkDirection;
use servwatt_core::report::{build_report, render, ReportFormat};
use servwatt_core::sim::generate_run;
use servwatt_core::topology::{ContainerId, ServiceTopology};

/// Exit codes: 0 success, 2 spec/validation error, 3 filesystem conflict,
/// 4 runtime failure. Stable across versions.
mod exit_codes {
    pub const OK: u8 = 0;
    pub const VALIDATION: u8 = 2;
    pub const FS_CONFLICT: u8 = 3;
    pub const RUNTIME: u8 = 4;
}

#[derive(Parser)]
#[command(
    name = "servwatt",
    about = "Service-level energy accounting and experimentation for containerized microservices",
    version
)]
struct Cli {
    /// Override the experiment seed from the spec file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for run execution.
    #[arg(long, global = true, default_value_t = 4)]
    workers: usize,
    /// Overwrite existing non-empty output directories.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate simulated metric streams for every planned run, no analysis.
    Simulate {
        /// Experiment spec YAML.
        spec: PathBuf,
        /// Stream output directory (defaults to the spec's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute the full pipeline: plan, run, aggregate, compare, archive.
    Run {
        /// Experiment spec YAML.
        spec: PathBuf,
        /// Override the spec's output_dir.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute energy for recorded usage vectors.
    Compute {
        /// usage.json (window + per-container usage vectors).
        usage: PathBuf,
        /// Optional topology JSON for per-service and group rollups.
        #[arg(long)]
        topology: Option<PathBuf>,
        /// Network intensity in kWh/GB (overrides --reference-year).
        #[arg(long)]
        network_kwh_per_gb: Option<f64>,
        /// Reference year for the network-intensity extrapolation.
        #[arg(long)]
        reference_year: Option<i32>,
        /// Storage retention period in days.
        #[arg(long, default_value_t = 30.0)]
        retention_days: f64,
        #[arg(long, value_parser = parse_attribution, default_value = "apportioned")]
        attribution_mode: AttributionMode,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render an archive as csv, json or md.
    Report {
        /// Archive directory written by `run`.
        archive: PathBuf,
        #[arg(long, default_value = "md")]
        format: String,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild comparison.json from the persisted per-run records.
    Compare {
        /// Archive directory written by `run`.
        archive: PathBuf,
        /// Output file (defaults to `<archive>/comparison.json`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_attribution(s: &str) -> Result<AttributionMode, String> {
    match s {
        "apportioned" => Ok(AttributionMode::Apportioned),
        "literal" => Ok(AttributionMode::Literal),
        other => Err(format!("unknown attribution mode {other:?}")),
    }
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: exit_codes::VALIDATION,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: exit_codes::RUNTIME,
            message: message.into(),
        }
    }

    fn fs_conflict(message: impl Into<String>) -> Self {
        CliError {
            code: exit_codes::FS_CONFLICT,
            message: message.into(),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let message = e.to_string();
        match &e {
            ExperimentError::Validation(_)
            | ExperimentError::Yaml(_)
            | ExperimentError::Topology(_)
            | ExperimentError::Model(_) => CliError::validation(message),
            ExperimentError::Sim(servwatt_core::sim::SimError::OutputCollision(_)) => {
                CliError::fs_conflict(message)
            }
            ExperimentError::Sim(servwatt_core::sim::SimError::InvalidScenario(_))
            | ExperimentError::Sim(servwatt_core::sim::SimError::BadParameter { .. })
            | ExperimentError::Sim(servwatt_core::sim::SimError::UnknownTreatment(_)) => {
                CliError::validation(message)
            }
            ExperimentError::Archive(m) if m.contains("not empty") => {
                CliError::fs_conflict(message)
            }
            _ => CliError::runtime(message),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::from(exit_codes::OK),
        Err(e) => {
            eprintln!("servwatt: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { spec, out } => cmd_simulate(&spec, out, cli.seed, cli.force),
        Command::Run { spec, out } => cmd_run(&spec, out, cli.seed, cli.workers, cli.force),
        Command::Compute {
            usage,
            topology,
            network_kwh_per_gb,
            reference_year,
            retention_days,
            attribution_mode,
            out,
        } => cmd_compute(
            &usage,
            topology.as_deref(),
            network_kwh_per_gb,
            reference_year,
            retention_days,
            attribution_mode,
            out.as_deref(),
        ),
        Command::Report { archive, format, out } => cmd_report(&archive, &format, out.as_deref()),
        Command::Compare { archive, out } => cmd_compare(&archive, out.as_deref()),
    }
}

fn load_spec(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<ExperimentSpec, CliError> {
    let mut spec = ExperimentSpec::from_yaml_file(path)?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(out) = out {
        spec.output_dir = out;
    }
    Ok(spec)
}

fn cmd_simulate(
    spec_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    force: bool,
) -> Result<(), CliError> {
    let spec = load_spec(spec_path, seed, out)?;
    let out_root = spec.output_dir.clone();
    if out_root.exists() && std::fs::read_dir(&out_root).map(|mut d| d.next().is_some()).unwrap_or(false) {
        if !force {
            return Err(CliError::fs_conflict(format!(
                "output directory {} is not empty (pass --force to overwrite)",
                out_root.display()
            )));
        }
        std::fs::remove_dir_all(&out_root).map_err(|e| CliError::runtime(e.to_string()))?;
    }
    let runs = plan_runs(&spec)?;
    for run in &runs {
        let dir = out_root.join(&run.scenario).join(run.repetition.to_string());
        std::fs::create_dir_all(dir.parent().unwrap())
            .map_err(|e| CliError::runtime(e.to_string()))?;
        generate_run(&run.config, &dir, run.seed).map_err(ExperimentError::Sim)?;
        println!("generated {}/{}", run.scenario, run.repetition);
    }
    println!("streams written to {}", out_root.display());
    Ok(())
}

fn cmd_run(
    spec_path: &Path,
    out: Option<PathBuf>,
    seed: Option<u64>,
    workers: usize,
    force: bool,
) -> Result<(), CliError> {
    let spec = load_spec(spec_path, seed, out)?;
    let outcome = run_experiment(&spec, workers, force)?;
    for r in &outcome.results {
        println!(
            "run {}/{}: total {:.3} Wh ({} ms)",
            r.scenario,
            r.repetition,
            r.energy.total.e_total_wh(),
            r.timing_ms
        );
    }
    for f in &outcome.failures {
        eprintln!("FAILED {}/{}: {}", f.scenario, f.repetition, f.error);
    }
    println!("archive written to {}", outcome.output_dir.display());
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(format!(
            "{} of {} runs failed",
            outcome.failures.len(),
            outcome.failures.len() + outcome.results.len()
        )))
    }
}

#[derive(serde::Deserialize)]
struct UsageDocIn {
    #[allow(dead_code)]
    #[serde(default)]
    window: serde_json::Value,
    containers: BTreeMap<ContainerId, servwatt_core::energy::UsageVector>,
}

fn cmd_compute(
    usage_path: &Path,
    topology_path: Option<&Path>,
    network_kwh_per_gb: Option<f64>,
    reference_year: Option<i32>,
    retention_days: f64,
    attribution_mode: AttributionMode,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let text = std::fs::read_to_string(usage_path)
        .map_err(|e| CliError::validation(format!("{}: {e}", usage_path.display())))?;
    let doc: UsageDocIn = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("usage schema mismatch: {e}")))?;

    let intensity_spec = experiment::IntensitySpec {
        network_kwh_per_gb,
        reference_year: reference_year.or(network_kwh_per_gb.is_none().then_some(2025)),
        storage_retention_days: retention_days,
    };
    let intensities = intensity_spec.resolve()?;

    let topology = match topology_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
            let t: ServiceTopology = serde_json::from_str(&text)
                .map_err(|e| CliError::validation(format!("topology schema mismatch: {e}")))?;
            t.validate().map_err(ExperimentError::Topology)?;
            t
        }
        None => {
            // without a topology every container stands alone as its own
            // primary service
            let mut t = ServiceTopology::new();
            for cid in doc.containers.keys() {
                let svc = t.add_service(cid.0.clone(), servwatt_core::ServiceRole::Primary);
                t.add_container(cid.0.clone(), "unknown", cid.0.clone(), &svc);
            }
            t
        }
    };

    let report = experiment::evaluate(
        &doc.containers,
        &topology,
        &intensities,
        attribution_mode,
        NetworkDirection::Both,
    )?;
    let mut json = serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    json.push('\n');
    write_output(out, &json)
}

fn cmd_report(archive: &Path, format: &str, out: Option<&Path>) -> Result<(), CliError> {
    let format: ReportFormat = format
        .parse()
        .map_err(|e: servwatt_core::report::ReportError| CliError::validation(e.to_string()))?;
    let loaded = load_archive(archive)?;
    let doc = build_report(&loaded).map_err(|e| match e {
        servwatt_core::report::ReportError::EmptyArchive => CliError::validation(e.to_string()),
        other => CliError::runtime(other.to_string()),
    })?;
    write_output(out, &render(&doc, format))
}

fn cmd_compare(archive: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let loaded = load_archive(archive)?;
    let aggregates = loaded.aggregates();
    let report = build_comparison(&aggregates, &loaded.index.baseline)?;
    let mut json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    json.push('\n');
    match out {
        Some(path) => std::fs::write(path, json).map_err(|e| CliError::runtime(e.to_string())),
        None => std::fs::write(archive.join("comparison.json"), json)
            .map_err(|e| CliError::runtime(e.to_string())),
    }?;
    Ok(())
}

fn write_output(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            std::fs::write(path, content).map_err(|e| CliError::runtime(e.to_string()))?
        }
        None => print!("{content}"),
    }
    Ok(())
}
