//! Experiment planning and execution: baseline + treatments x repetitions,
//! pipeline orchestration, statistics and comparable result archives.

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{AttributionMode, EnergyIntensityConfig, ModelError};
use crate::ingest::{IngestError, NetworkDirection};
use crate::sim::{apply_scenario_treatment, stable_seed, ScenarioConfig, SimError, TreatmentSpec};
use crate::topology::TopologyError;

mod archive;
mod compare;
mod evaluate;
mod live;
mod runner;
pub mod stats;

pub use archive::{load_archive, ArchiveIndex, LoadedArchive, INDEX_FILE};
pub use compare::{
    build_comparison, compare, scenario_aggregate, ComparisonReport, ComponentAggregates,
    DeltaRow, EntityKey, KpiComparison, ScenarioAggregate, TreatmentComparison,
};
pub use evaluate::{evaluate, EnergyReport, IntensitiesUsed, Kpis, ProjectionEntry, TotalSummary};
pub use live::MetricFetcher;
pub use runner::{run_experiment, ExperimentOutcome, RunFailure, RunResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    Validation(String),
    #[error("topology: {0}")]
    Topology(#[from] TopologyError),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("simulator: {0}")]
    Sim(#[from] SimError),
    #[error("service sets differ between compared scenarios; asymmetric: {0:?}")]
    MismatchedServices(Vec<String>),
    #[error("metric fetch failed: {0}")]
    Fetch(String),
    #[error("archive: {0}")]
    Archive(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("yaml: {0}")]
    Yaml(#[from] serde_yaml::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Where metric streams come from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Generate streams with the built-in simulator.
    #[default]
    Simulate,
    /// Ingest pre-recorded scrape directories laid out like simulator output.
    Replay(ReplayConfig),
    /// Fetch range queries from a metric-server HTTP API after the run.
    Live(LiveConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    /// Directory containing `<scenario>/<repetition>/scrapes/*.prom`.
    pub streams_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiveConfig {
    /// Metric-server base URL; the METRICS_ENDPOINT environment variable
    /// overrides it.
    #[serde(default)]
    pub endpoint: Option<String>,
    /// Recorded run window to query, epoch milliseconds.
    pub start_ms: i64,
    pub end_ms: i64,
    /// Query resolution step, seconds.
    #[serde(default = "default_step_s")]
    pub step_s: f64,
}

fn default_step_s() -> f64 {
    60.0
}

/// Intensity configuration surface: the network side is either an explicit
/// kWh/GB figure or derived from a reference year.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network_kwh_per_gb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_year: Option<i32>,
    #[serde(default = "default_retention_days")]
    pub storage_retention_days: f64,
}

fn default_retention_days() -> f64 {
    30.0
}

impl Default for IntensitySpec {
    fn default() -> Self {
        IntensitySpec {
            network_kwh_per_gb: None,
            reference_year: Some(2025),
            storage_retention_days: 30.0,
        }
    }
}

impl IntensitySpec {
    pub fn resolve(&self) -> Result<EnergyIntensityConfig, ExperimentError> {
        let year = self.reference_year.unwrap_or(2025);
        let config = match self.network_kwh_per_gb {
            Some(kwh) => EnergyIntensityConfig::with_network_kwh_per_gb(
                kwh,
                self.storage_retention_days,
                year,
            )?,
            None => {
                if self.reference_year.is_none() {
                    return Err(ExperimentError::Validation(
                        "intensities need either network_kwh_per_gb or reference_year".into(),
                    ));
                }
                EnergyIntensityConfig::derived(year, self.storage_retention_days)?
            }
        };
        Ok(config)
    }
}

pub const BASELINE_SCENARIO: &str = "baseline";

/// A full experiment: baseline scenario, treatments, repetitions, intensity
/// configuration and archive location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    /// `builtin` or a path to a topology JSON file.
    #[serde(default = "default_topology_source")]
    pub topology: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub mode: RunMode,
    #[serde(default)]
    pub seed: u64,
    /// Repetitions per scenario; defaults to the baseline's setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<u32>,
    #[serde(default)]
    pub attribution_mode: AttributionMode,
    #[serde(default)]
    pub network_direction: NetworkDirection,
    #[serde(default)]
    pub intensities: IntensitySpec,
    #[serde(default)]
    pub baseline: ScenarioConfig,
    #[serde(default)]
    pub treatments: Vec<TreatmentSpec>,
}

fn default_topology_source() -> String {
    "builtin".into()
}

impl ExperimentSpec {
    pub fn from_yaml(text: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = serde_yaml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_yaml_file(path: &std::path::Path) -> Result<Self, ExperimentError> {
        Self::from_yaml(&std::fs::read_to_string(path)?)
    }

    pub fn effective_repetitions(&self) -> u32 {
        self.repetitions.unwrap_or(self.baseline.repetitions)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.name.is_empty() {
            return Err(ExperimentError::Validation("experiment name is empty".into()));
        }
        if self.effective_repetitions() == 0 {
            return Err(ExperimentError::Validation("repetitions must be >= 1".into()));
        }
        self.baseline.validate()?;
        self.intensities.resolve()?;
        let mut names = BTreeSet::new();
        for t in &self.treatments {
            if t.name == BASELINE_SCENARIO {
                return Err(ExperimentError::Validation(
                    "treatment may not be named 'baseline'".into(),
                ));
            }
            if !names.insert(t.name.clone()) {
                return Err(ExperimentError::Validation(format!(
                    "duplicate treatment name {:?}",
                    t.name
                )));
            }
            // surfacing bad kinds/parameters at validation time
            apply_scenario_treatment(&self.baseline, t)?;
        }
        Ok(())
    }

    /// All scenarios in execution order: baseline first, then treatments.
    pub fn scenarios(&self) -> Result<Vec<(String, ScenarioConfig)>, ExperimentError> {
        let mut out = vec![(BASELINE_SCENARIO.to_string(), self.baseline.clone())];
        for t in &self.treatments {
            out.push((t.name.clone(), apply_scenario_treatment(&self.baseline, t)?));
        }
        Ok(out)
    }
}

/// One planned pipeline execution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedRun {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub repetition: u32,
    pub seed: u64,
}

/// Expand the spec into `(1 + treatments) x repetitions` runs, baseline
/// first, each with a stable unique sub-seed so adding treatments never
/// perturbs existing runs.
pub fn plan_runs(spec: &ExperimentSpec) -> Result<Vec<PlannedRun>, ExperimentError> {
    spec.validate()?;
    let reps = spec.effective_repetitions();
    let mut runs = Vec::new();
    for (name, mut config) in spec.scenarios()? {
        for rep in 0..reps {
            let seed = stable_seed(spec.seed, &[&name, &rep.to_string()]);
            config.seed = seed;
            runs.push(PlannedRun {
                scenario: name.clone(),
                config: config.clone(),
                repetition: rep,
                seed,
            });
        }
    }
    Ok(runs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TreatmentKind;

    fn spec_with_treatments(treatments: Vec<TreatmentSpec>) -> ExperimentSpec {
        ExperimentSpec {
            name: "t".into(),
            topology: "builtin".into(),
            output_dir: "out".into(),
            mode: RunMode::Simulate,
            seed: 42,
            repetitions: Some(3),
            attribution_mode: AttributionMode::Apportioned,
            network_direction: NetworkDirection::Both,
            intensities: IntensitySpec::default(),
            baseline: ScenarioConfig::default(),
            treatments,
        }
    }

    fn treatment(name: &str, kind: TreatmentKind, value: serde_json::Value) -> TreatmentSpec {
        TreatmentSpec {
            name: name.into(),
            kind,
            value,
            patch: None,
        }
    }

    #[test]
    fn six_scenarios_three_reps_eighteen_runs() {
        let spec = spec_with_treatments(vec![
            treatment("tracing-low", TreatmentKind::TraceSampling, 0.05.into()),
            treatment("tracing-medium", TreatmentKind::TraceSampling, 0.10.into()),
            treatment("tracing-high", TreatmentKind::TraceSampling, 0.50.into()),
            treatment("monitoring-high", TreatmentKind::ScrapeInterval, 5.into()),
            treatment("service-mesh", TreatmentKind::ServiceMesh, true.into()),
        ]);
        let runs = plan_runs(&spec).unwrap();
        assert_eq!(runs.len(), 18);
        assert_eq!(runs[0].scenario, "baseline");
        assert_eq!(runs[2].repetition, 2);
        let seeds: BTreeSet<u64> = runs.iter().map(|r| r.seed).collect();
        assert_eq!(seeds.len(), 18, "sub-seeds must be unique");
    }

    #[test]
    fn zero_treatments_one_rep_one_run() {
        let mut spec = spec_with_treatments(vec![]);
        spec.repetitions = Some(1);
        let runs = plan_runs(&spec).unwrap();
        assert_eq!(runs.len(), 1);
        assert_eq!(runs[0].scenario, "baseline");
    }

    #[test]
    fn duplicate_treatment_names_rejected() {
        let spec = spec_with_treatments(vec![
            treatment("same", TreatmentKind::TraceSampling, 0.05.into()),
            treatment("same", TreatmentKind::TraceSampling, 0.10.into()),
        ]);
        assert!(matches!(
            plan_runs(&spec),
            Err(ExperimentError::Validation(_))
        ));
    }

    #[test]
    fn adding_a_treatment_keeps_existing_seeds() {
        let one = spec_with_treatments(vec![treatment(
            "tracing-high",
            TreatmentKind::TraceSampling,
            0.5.into(),
        )]);
        let two = spec_with_treatments(vec![
            treatment("tracing-high", TreatmentKind::TraceSampling, 0.5.into()),
            treatment("service-mesh", TreatmentKind::ServiceMesh, true.into()),
        ]);
        let runs_one = plan_runs(&one).unwrap();
        let runs_two = plan_runs(&two).unwrap();
        for (a, b) in runs_one.iter().zip(runs_two.iter()) {
            assert_eq!(a.seed, b.seed);
            assert_eq!(a.scenario, b.scenario);
        }
    }

    #[test]
    fn one_controlled_change_per_treatment() {
        let spec = spec_with_treatments(vec![
            treatment("tracing-high", TreatmentKind::TraceSampling, 0.5.into()),
            treatment("monitoring-high", TreatmentKind::ScrapeInterval, 5.into()),
            treatment("service-mesh", TreatmentKind::ServiceMesh, true.into()),
        ]);
        for (name, config) in spec.scenarios().unwrap().iter().skip(1) {
            let diff = config.diff_fields(&spec.baseline);
            assert_eq!(diff.len(), 1, "{name} changes {diff:?}");
        }
    }

    #[test]
    fn yaml_round_trip() {
        let yaml = r#"
name: desk
output_dir: out
seed: 7
intensities:
  reference_year: 2025
  storage_retention_days: 30
baseline:
  duration_minutes: 7
  measurement_interval_s: 6
  warmup_trim_s: 42
  cooldown_trim_s: 18
treatments:
  - name: tracing-high
    kind: trace_sampling
    value: 0.5
"#;
        let spec = ExperimentSpec::from_yaml(yaml).unwrap();
        assert_eq!(spec.baseline.duration_minutes, 7.0);
        assert_eq!(spec.baseline.scrape_interval_s, 60.0);
        assert_eq!(spec.treatments.len(), 1);
        assert_eq!(spec.effective_repetitions(), 3);
    }

    #[test]
    fn unknown_treatment_kind_fails_yaml() {
        let yaml = r#"
name: bad
output_dir: out
treatments:
  - name: x
    kind: flux_capacitor
    value: 1
"#;
        assert!(ExperimentSpec::from_yaml(yaml).is_err());
    }
}
