//! Pipeline execution: generate or fetch streams, ingest, evaluate, persist.
//!
//! Runs are independent and may execute on a bounded worker pool; each run
//! writes into a temporary directory renamed into place on success, so a
//! failed run leaves no partial archive entry and cannot disturb others.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ingest::{
    build_usage, group_into_series, parse_exposition, CounterSeries, Diagnostics, MetricMapping,
    RunWindow,
};
use crate::sim::{generate_run, ScenarioConfig, PV_SIZES_FILE};
use crate::topology::{ContainerId, ServiceTopology};

use super::archive::{
    self, rep_dir, scenario_dir, write_json, write_summary_csv, ArchiveIndex, DiagnosticsDoc,
    UsageDoc, COMPARISON_FILE, DIAGNOSTICS_FILE, ENERGY_FILE, INDEX_FILE, SUMMARY_FILE,
    USAGE_FILE,
};
use super::compare::{build_comparison, scenario_aggregate, ComparisonReport, ScenarioAggregate};
use super::evaluate::{evaluate, EnergyReport};
use super::live::MetricFetcher;
use super::{
    plan_runs, ExperimentError, ExperimentSpec, PlannedRun, RunMode, BASELINE_SCENARIO,
};

/// Outcome of one completed run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: String,
    pub repetition: u32,
    pub seed: u64,
    pub energy: EnergyReport,
    pub diagnostics: Diagnostics,
    pub timing_ms: u64,
}

/// Machine-readable record of a failed run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunFailure {
    pub scenario: String,
    pub repetition: u32,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub results: Vec<RunResult>,
    pub failures: Vec<RunFailure>,
    pub comparison: Option<ComparisonReport>,
    pub output_dir: PathBuf,
}

fn resolve_topology(spec: &ExperimentSpec, scenario: &ScenarioConfig) -> Result<ServiceTopology, ExperimentError> {
    if spec.topology == "builtin" {
        Ok(crate::sim::profile::default_topology(scenario.mesh_enabled))
    } else {
        let topo: ServiceTopology = archive::read_json(Path::new(&spec.topology))?;
        topo.validate()?;
        Ok(topo)
    }
}

/// Read and parse every scrape file under `dir`, newest last.
fn ingest_scrape_dir(dir: &Path) -> Result<Vec<CounterSeries>, ExperimentError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "prom"))
        .collect();
    paths.sort();
    let mut samples = Vec::new();
    for path in &paths {
        let scrape_time = path
            .file_stem()
            .and_then(|s| s.to_str())
            .and_then(|s| s.rsplit('-').next())
            .and_then(|s| s.parse::<i64>().ok())
            .unwrap_or(1);
        let text = fs::read_to_string(path)?;
        samples.extend(parse_exposition(&text, scrape_time)?);
    }
    Ok(group_into_series(samples)?)
}

fn read_pv_sizes(path: &Path) -> Result<BTreeMap<ContainerId, f64>, ExperimentError> {
    if path.exists() {
        archive::read_json(path)
    } else {
        Ok(BTreeMap::new())
    }
}

/// Execute one planned run end to end, persisting its archive entry.
pub fn execute_run(
    spec: &ExperimentSpec,
    run: &PlannedRun,
    out_root: &Path,
) -> Result<RunResult, ExperimentError> {
    let started = Instant::now();
    let final_dir = rep_dir(out_root, &run.scenario, run.repetition);
    let tmp_dir = scenario_dir(out_root, &run.scenario)
        .join(format!(".{}.tmp", run.repetition));
    if tmp_dir.exists() {
        fs::remove_dir_all(&tmp_dir)?;
    }
    fs::create_dir_all(&tmp_dir)?;

    let outcome = (|| -> Result<RunResult, ExperimentError> {
        let topology = resolve_topology(spec, &run.config)?;
        let intensities = spec.intensities.resolve()?;
        let mapping = MetricMapping::default();

        let (series, window, pv_sizes) = match &spec.mode {
            RunMode::Simulate => {
                let generated = generate_run(&run.config, &tmp_dir, run.seed)?;
                let series = ingest_scrape_dir(&tmp_dir.join("scrapes"))?;
                (series, generated.window, generated.pv_sizes)
            }
            RunMode::Replay(replay) => {
                let src = rep_dir(&replay.streams_dir, &run.scenario, run.repetition);
                if !src.exists() {
                    return Err(ExperimentError::Archive(format!(
                        "no recorded streams at {}",
                        src.display()
                    )));
                }
                let series = ingest_scrape_dir(&src.join("scrapes"))?;
                let pv_sizes = read_pv_sizes(&src.join(PV_SIZES_FILE))?;
                let window = replay_window(&run.config, &series)?;
                (series, window, pv_sizes)
            }
            RunMode::Live(live) => {
                let fetcher = MetricFetcher::from_config(live)?;
                let series = fetcher.fetch_all(&mapping, live)?;
                let window = RunWindow {
                    start_ms: live.start_ms,
                    end_ms: live.end_ms,
                    warmup_ms: (run.config.warmup_trim_s * 1000.0) as i64,
                    cooldown_ms: (run.config.cooldown_trim_s * 1000.0) as i64,
                };
                window.validate()?;
                (series, window, BTreeMap::new())
            }
        };

        let built = build_usage(
            &series,
            &mapping,
            &topology,
            &window,
            &pv_sizes,
            spec.network_direction,
        )?;
        let energy = evaluate(
            &built.usage,
            &topology,
            &intensities,
            spec.attribution_mode,
            spec.network_direction,
        )?;

        write_json(
            &tmp_dir.join(USAGE_FILE),
            &UsageDoc {
                window,
                containers: built.usage.clone(),
            },
        )?;
        write_json(&tmp_dir.join(ENERGY_FILE), &energy)?;
        let timing_ms = started.elapsed().as_millis() as u64;
        write_json(
            &tmp_dir.join(DIAGNOSTICS_FILE),
            &DiagnosticsDoc {
                scenario: run.scenario.clone(),
                repetition: run.repetition,
                seed: run.seed,
                diagnostics: built.diagnostics.clone(),
                timing_ms,
            },
        )?;

        Ok(RunResult {
            scenario: run.scenario.clone(),
            repetition: run.repetition,
            seed: run.seed,
            energy,
            diagnostics: built.diagnostics,
            timing_ms,
        })
    })();

    match outcome {
        Ok(result) => {
            if final_dir.exists() {
                fs::remove_dir_all(&final_dir)?;
            }
            fs::rename(&tmp_dir, &final_dir)?;
            Ok(result)
        }
        Err(e) => {
            let _ = fs::remove_dir_all(&tmp_dir);
            Err(e)
        }
    }
}

/// Derive the trimmed window of a replayed run from its scrape span.
fn replay_window(
    config: &ScenarioConfig,
    series: &[CounterSeries],
) -> Result<RunWindow, ExperimentError> {
    let start = series
        .iter()
        .filter_map(|s| s.samples.first().map(|(t, _)| *t))
        .min()
        .ok_or_else(|| ExperimentError::Archive("replay input has no samples".into()))?;
    let end = series
        .iter()
        .filter_map(|s| s.samples.last().map(|(t, _)| *t))
        .max()
        .unwrap_or(start);
    let window = RunWindow {
        start_ms: start,
        end_ms: end,
        warmup_ms: (config.warmup_trim_s * 1000.0) as i64,
        cooldown_ms: (config.cooldown_trim_s * 1000.0) as i64,
    };
    window.validate()?;
    Ok(window)
}

/// Execute every planned run on `workers` threads, then aggregate, compare
/// and persist the archive. Failures are recorded; completed runs are kept.
pub fn run_experiment(
    spec: &ExperimentSpec,
    workers: usize,
    force: bool,
) -> Result<ExperimentOutcome, ExperimentError> {
    spec.validate()?;
    let out_root = spec.output_dir.clone();
    if out_root.exists() && fs::read_dir(&out_root)?.next().is_some() {
        if !force {
            return Err(ExperimentError::Archive(format!(
                "output directory {} is not empty (use force to overwrite)",
                out_root.display()
            )));
        }
        fs::remove_dir_all(&out_root)?;
    }
    fs::create_dir_all(&out_root)?;

    let runs = plan_runs(spec)?;
    for run in &runs {
        fs::create_dir_all(scenario_dir(&out_root, &run.scenario))?;
    }

    // emit patch descriptors for operators in live mode
    if matches!(spec.mode, RunMode::Live(_)) {
        let patches_dir = out_root.join("patches");
        fs::create_dir_all(&patches_dir)?;
        for t in &spec.treatments {
            if let Some(p) = t.patch_descriptor() {
                write_json(&patches_dir.join(format!("{}.json", t.name)), &p)?;
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Archive(e.to_string()))?;
    let outcomes: Vec<Result<RunResult, RunFailure>> = pool.install(|| {
        use rayon::prelude::*;
        runs.par_iter()
            .map(|run| {
                execute_run(spec, run, &out_root).map_err(|e| RunFailure {
                    scenario: run.scenario.clone(),
                    repetition: run.repetition,
                    seed: run.seed,
                    error: e.to_string(),
                })
            })
            .collect()
    });

    let mut results = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => results.push(r),
            Err(f) => failures.push(f),
        }
    }
    results.sort_by(|a, b| (&a.scenario, a.repetition).cmp(&(&b.scenario, b.repetition)));

    if !failures.is_empty() {
        let dir = out_root.join("failures");
        fs::create_dir_all(&dir)?;
        for f in &failures {
            write_json(&dir.join(format!("{}-{}.json", f.scenario, f.repetition)), f)?;
        }
    }

    let scenario_names: Vec<String> = spec
        .scenarios()?
        .into_iter()
        .map(|(name, _)| name)
        .filter(|name| results.iter().any(|r| &r.scenario == name))
        .collect();

    write_json(
        &out_root.join(INDEX_FILE),
        &ArchiveIndex {
            experiment: spec.name.clone(),
            seed: spec.seed,
            baseline: BASELINE_SCENARIO.to_string(),
            scenarios: scenario_names.clone(),
            repetitions: spec.effective_repetitions(),
        },
    )?;

    let aggregates: Vec<ScenarioAggregate> = scenario_names
        .iter()
        .map(|name| {
            let reports: Vec<EnergyReport> = results
                .iter()
                .filter(|r| &r.scenario == name)
                .map(|r| r.energy.clone())
                .collect();
            scenario_aggregate(name, &reports)
        })
        .collect();

    write_summary_csv(&out_root.join(SUMMARY_FILE), &aggregates)?;

    let comparison = if scenario_names.iter().any(|n| n == BASELINE_SCENARIO) {
        let report = build_comparison(&aggregates, BASELINE_SCENARIO)?;
        write_json(&out_root.join(COMPARISON_FILE), &report)?;
        Some(report)
    } else {
        None
    };

    Ok(ExperimentOutcome {
        results,
        failures,
        comparison,
        output_dir: out_root,
    })
}
