//! Results archive: a directory of self-describing JSON records plus a
//! flat CSV summary.
//!
//! Layout:
//!   `<out>/archive.json`                       index
//!   `<out>/<scenario>/<rep>/scrapes/*.prom`    raw streams (simulate mode)
//!   `<out>/<scenario>/<rep>/usage.json`
//!   `<out>/<scenario>/<rep>/energy.json`
//!   `<out>/<scenario>/<rep>/diagnostics.json`
//!   `<out>/summary.csv`
//!   `<out>/comparison.json`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::energy::UsageVector;
use crate::ingest::{Diagnostics, RunWindow};
use crate::topology::ContainerId;

use super::compare::{scenario_aggregate, ScenarioAggregate};
use super::evaluate::EnergyReport;
use super::stats::Aggregate;
use super::ExperimentError;

pub const INDEX_FILE: &str = "archive.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const USAGE_FILE: &str = "usage.json";
pub const ENERGY_FILE: &str = "energy.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

/// Archive index: scenario order and experiment identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveIndex {
    pub experiment: String,
    pub seed: u64,
    pub baseline: String,
    /// Scenario names in planned order, baseline first.
    pub scenarios: Vec<String>,
    pub repetitions: u32,
}

/// The archived per-run usage document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageDoc {
    pub window: RunWindow,
    pub containers: BTreeMap<ContainerId, UsageVector>,
}

/// The archived per-run diagnostics document, present even when empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDoc {
    pub scenario: String,
    pub repetition: u32,
    pub seed: u64,
    pub diagnostics: Diagnostics,
    /// Wall-clock pipeline duration; excluded from golden comparisons.
    pub timing_ms: u64,
}

pub fn scenario_dir(out: &Path, scenario: &str) -> PathBuf {
    out.join(scenario)
}

pub fn rep_dir(out: &Path, scenario: &str, rep: u32) -> PathBuf {
    out.join(scenario).join(rep.to_string())
}

/// Serialize as pretty JSON with a trailing newline (stable golden files).
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>, ExperimentError> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ExperimentError> {
    fs::write(path, to_json_bytes(value)?)?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, ExperimentError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ExperimentError::Archive(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| ExperimentError::Archive(format!("{}: {e}", path.display())))
}

/// A fully loaded archive: every scenario's per-repetition energy reports.
#[derive(Debug, Clone)]
pub struct LoadedArchive {
    pub index: ArchiveIndex,
    pub runs: BTreeMap<String, Vec<EnergyReport>>,
}

impl LoadedArchive {
    pub fn aggregates(&self) -> Vec<ScenarioAggregate> {
        self.index
            .scenarios
            .iter()
            .map(|name| scenario_aggregate(name, &self.runs[name]))
            .collect()
    }

    pub fn aggregate_for(&self, scenario: &str) -> Option<ScenarioAggregate> {
        self.runs
            .get(scenario)
            .map(|reports| scenario_aggregate(scenario, reports))
    }
}

/// Load an archive written by the experiment engine.
pub fn load_archive(out: &Path) -> Result<LoadedArchive, ExperimentError> {
    let index: ArchiveIndex = read_json(&out.join(INDEX_FILE))?;
    let mut runs = BTreeMap::new();
    for scenario in &index.scenarios {
        let mut reports = Vec::new();
        for rep in 0..index.repetitions {
            let path = rep_dir(out, scenario, rep).join(ENERGY_FILE);
            if path.exists() {
                reports.push(read_json::<EnergyReport>(&path)?);
            }
        }
        if reports.is_empty() {
            return Err(ExperimentError::Archive(format!(
                "scenario {scenario} has no completed runs in {}",
                out.display()
            )));
        }
        runs.insert(scenario.clone(), reports);
    }
    Ok(LoadedArchive { index, runs })
}

/// Format a float with full shortest-round-trip precision.
fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

/// Write the flat per-entity summary: one row per (scenario, group, service)
/// with mean and 95% CI per component, full precision.
pub fn write_summary_csv(
    path: &Path,
    aggregates: &[ScenarioAggregate],
) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scenario",
        "group",
        "service",
        "reps",
        "e_cpu_wh_mean",
        "e_cpu_wh_ci95",
        "e_memory_wh_mean",
        "e_memory_wh_ci95",
        "e_network_wh_mean",
        "e_network_wh_ci95",
        "e_storage_wh_mean",
        "e_storage_wh_ci95",
        "e_compute_wh_mean",
        "e_compute_wh_ci95",
        "e_total_wh_mean",
        "e_total_wh_ci95",
    ])
    .map_err(csv_err)?;
    for agg in aggregates {
        for (key, comps) in &agg.entities {
            let cell = |a: &Aggregate| (fmt(a.mean), fmt_opt(a.ci95_half_width));
            let (cpu_m, cpu_c) = cell(&comps.e_cpu);
            let (mem_m, mem_c) = cell(&comps.e_memory);
            let (net_m, net_c) = cell(&comps.e_network);
            let (st_m, st_c) = cell(&comps.e_storage);
            let (comp_m, comp_c) = cell(&comps.e_compute);
            let (tot_m, tot_c) = cell(&comps.e_total);
            w.write_record([
                agg.scenario.as_str(),
                key.group.as_str(),
                key.service.as_str(),
                &agg.reps.to_string(),
                &cpu_m,
                &cpu_c,
                &mem_m,
                &mem_c,
                &net_m,
                &net_c,
                &st_m,
                &st_c,
                &comp_m,
                &comp_c,
                &tot_m,
                &tot_c,
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| ExperimentError::Archive(e.to_string()))?;
    fs::write(path, bytes)?;
    Ok(())
}

fn csv_err(e: csv::Error) -> ExperimentError {
    ExperimentError::Archive(e.to_string())
}
