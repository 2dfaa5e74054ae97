//! Deterministic workload and metric-stream simulator for the modeled
//! microservice deployment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod generate;
pub mod profile;
mod rng;

pub use generate::{generate_run, GeneratedRun, GROUND_TRUTH_FILE, MANIFEST_FILE, PV_SIZES_FILE};
pub use rng::{stable_seed, NoiseStream};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid profile for {service}: {reason}")]
    InvalidProfile { service: String, reason: String },
    #[error("unknown treatment kind {0:?}")]
    UnknownTreatment(String),
    #[error("treatment {name}: parameter out of range: {reason}")]
    BadParameter { name: String, reason: String },
    #[error("output path {0} already contains files (use force to overwrite)")]
    OutputCollision(std::path::PathBuf),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

/// One simulated experiment scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_minutes: f64,
    pub virtual_users: u32,
    /// Open-loop request rate at the nominal 500 virtual users.
    pub base_request_rate_per_s: f64,
    pub trace_sampling_rate: f64,
    /// Monitoring scrape interval inside the deployment (the treatment knob
    /// driving metric volume), seconds.
    pub scrape_interval_s: f64,
    /// Cadence of the external measurement plane's scrape files, seconds.
    pub measurement_interval_s: f64,
    pub mesh_enabled: bool,
    pub repetitions: u32,
    pub warmup_trim_s: f64,
    pub cooldown_trim_s: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 0,
            duration_minutes: 70.0,
            virtual_users: 500,
            base_request_rate_per_s: 750.0,
            trace_sampling_rate: 0.01,
            scrape_interval_s: 60.0,
            measurement_interval_s: 60.0,
            mesh_enabled: false,
            repetitions: 3,
            warmup_trim_s: 420.0,
            cooldown_trim_s: 180.0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidScenario(msg));
        if !(self.trace_sampling_rate > 0.0 && self.trace_sampling_rate <= 1.0) {
            return bad(format!("sampling rate {} not in (0, 1]", self.trace_sampling_rate));
        }
        if self.scrape_interval_s < 1.0 {
            return bad(format!("scrape interval {} s below 1 s", self.scrape_interval_s));
        }
        if self.measurement_interval_s < 1.0 {
            return bad(format!(
                "measurement interval {} s below 1 s",
                self.measurement_interval_s
            ));
        }
        if self.duration_minutes <= 0.0 || !self.duration_minutes.is_finite() {
            return bad(format!("duration {} minutes", self.duration_minutes));
        }
        let duration_s = self.duration_minutes * 60.0;
        if duration_s <= self.warmup_trim_s + self.cooldown_trim_s {
            return bad(format!(
                "duration {duration_s} s does not exceed trim total {} s",
                self.warmup_trim_s + self.cooldown_trim_s
            ));
        }
        if self.warmup_trim_s < 0.0 || self.cooldown_trim_s < 0.0 {
            return bad("negative trim".into());
        }
        if self.base_request_rate_per_s < 0.0 || !self.base_request_rate_per_s.is_finite() {
            return bad(format!("request rate {}", self.base_request_rate_per_s));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be >= 1".into());
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_minutes * 60.0
    }

    /// Effective open-loop request rate scaled by the virtual-user count.
    pub fn request_rate_per_s(&self) -> f64 {
        self.base_request_rate_per_s * self.virtual_users as f64 / 500.0
    }

    /// Names of fields differing from `other`; used to enforce the
    /// one-controlled-change rule (seed and repetitions are run identity,
    /// not treatment surface).
    pub fn diff_fields(&self, other: &ScenarioConfig) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.duration_minutes != other.duration_minutes {
            out.push("duration_minutes");
        }
        if self.virtual_users != other.virtual_users {
            out.push("virtual_users");
        }
        if self.base_request_rate_per_s != other.base_request_rate_per_s {
            out.push("base_request_rate_per_s");
        }
        if self.trace_sampling_rate != other.trace_sampling_rate {
            out.push("trace_sampling_rate");
        }
        if self.scrape_interval_s != other.scrape_interval_s {
            out.push("scrape_interval_s");
        }
        if self.measurement_interval_s != other.measurement_interval_s {
            out.push("measurement_interval_s");
        }
        if self.mesh_enabled != other.mesh_enabled {
            out.push("mesh_enabled");
        }
        if self.warmup_trim_s != other.warmup_trim_s {
            out.push("warmup_trim_s");
        }
        if self.cooldown_trim_s != other.cooldown_trim_s {
            out.push("cooldown_trim_s");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreatmentKind {
    TraceSampling,
    ScrapeInterval,
    ServiceMesh,
    CustomPatch,
}

/// A single controlled change applied to the baseline scenario. In live
/// mode the change is emitted as a patch descriptor, never applied by the
/// engine itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentSpec {
    pub name: String,
    pub kind: TreatmentKind,
    #[serde(default)]
    pub value: serde_json::Value,
    /// Explicit patch descriptor for `custom_patch`; derived for the
    /// built-in kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<PatchDescriptor>,
}

/// Configuration change descriptor for an external operator to apply.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchDescriptor {
    /// Target object, e.g. `configmap/otel-collector-conf`.
    pub target: String,
    pub key_path: String,
    pub value: String,
}

impl TreatmentSpec {
    fn number(&self) -> Option<f64> {
        self.value.as_f64()
    }

    fn flag(&self) -> Option<bool> {
        self.value.as_bool().or(Some(true).filter(|_| self.value.is_null()))
    }

    /// The configuration patch this treatment corresponds to on a live
    /// deployment.
    pub fn patch_descriptor(&self) -> Option<PatchDescriptor> {
        match self.kind {
            TreatmentKind::TraceSampling => Some(PatchDescriptor {
                target: "configmap/otel-collector-conf".into(),
                key_path: "processors.probabilistic_sampler.sampling_percentage".into(),
                value: format!("{}", self.number().unwrap_or(0.0) * 100.0),
            }),
            TreatmentKind::ScrapeInterval => Some(PatchDescriptor {
                target: "configmap/prometheus-config".into(),
                key_path: "global.scrape_interval".into(),
                value: format!("{}s", self.number().unwrap_or(0.0)),
            }),
            TreatmentKind::ServiceMesh => Some(PatchDescriptor {
                target: "helm/istio".into(),
                key_path: "profile".into(),
                value: "sidecar".into(),
            }),
            TreatmentKind::CustomPatch => self.patch.clone(),
        }
    }
}

/// Apply one treatment to a baseline scenario, changing exactly one field.
pub fn apply_scenario_treatment(
    base: &ScenarioConfig,
    treatment: &TreatmentSpec,
) -> Result<ScenarioConfig, SimError> {
    let mut out = base.clone();
    match treatment.kind {
        TreatmentKind::TraceSampling => {
            let rate = treatment.number().ok_or_else(|| SimError::BadParameter {
                name: treatment.name.clone(),
                reason: "trace_sampling needs a numeric rate".into(),
            })?;
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(SimError::BadParameter {
                    name: treatment.name.clone(),
                    reason: format!("sampling rate {rate} not in (0, 1]"),
                });
            }
            out.trace_sampling_rate = rate;
        }
        TreatmentKind::ScrapeInterval => {
            let interval = treatment.number().ok_or_else(|| SimError::BadParameter {
                name: treatment.name.clone(),
                reason: "scrape_interval needs a numeric seconds value".into(),
            })?;
            if interval < 1.0 {
                return Err(SimError::BadParameter {
                    name: treatment.name.clone(),
                    reason: format!("scrape interval {interval} s below 1 s"),
                });
            }
            out.scrape_interval_s = interval;
        }
        TreatmentKind::ServiceMesh => {
            let enabled = treatment.flag().ok_or_else(|| SimError::BadParameter {
                name: treatment.name.clone(),
                reason: "service_mesh needs a boolean".into(),
            })?;
            out.mesh_enabled = enabled;
        }
        TreatmentKind::CustomPatch => {
            if treatment.patch.is_none() {
                return Err(SimError::BadParameter {
                    name: treatment.name.clone(),
                    reason: "custom_patch needs an explicit patch descriptor".into(),
                });
            }
            // custom patches target live deployments only; the simulated
            // scenario is unchanged
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn treatment(kind: TreatmentKind, value: serde_json::Value) -> TreatmentSpec {
        TreatmentSpec {
            name: "t".into(),
            kind,
            value,
            patch: None,
        }
    }

    #[test]
    fn sampling_treatment_changes_exactly_one_field() {
        let base = ScenarioConfig::default();
        let out =
            apply_scenario_treatment(&base, &treatment(TreatmentKind::TraceSampling, 0.5.into()))
                .unwrap();
        assert_eq!(out.trace_sampling_rate, 0.5);
        assert_eq!(out.diff_fields(&base), vec!["trace_sampling_rate"]);
    }

    #[test]
    fn scrape_interval_treatment() {
        let base = ScenarioConfig::default();
        let out =
            apply_scenario_treatment(&base, &treatment(TreatmentKind::ScrapeInterval, 5.into()))
                .unwrap();
        assert_eq!(out.scrape_interval_s, 5.0);
        assert_eq!(out.diff_fields(&base), vec!["scrape_interval_s"]);
    }

    #[test]
    fn mesh_treatment() {
        let base = ScenarioConfig::default();
        let out = apply_scenario_treatment(
            &base,
            &treatment(TreatmentKind::ServiceMesh, true.into()),
        )
        .unwrap();
        assert!(out.mesh_enabled);
        assert_eq!(out.diff_fields(&base), vec!["mesh_enabled"]);
    }

    #[test]
    fn out_of_range_parameters_rejected() {
        let base = ScenarioConfig::default();
        assert!(apply_scenario_treatment(
            &base,
            &treatment(TreatmentKind::TraceSampling, 1.5.into())
        )
        .is_err());
        assert!(apply_scenario_treatment(
            &base,
            &treatment(TreatmentKind::TraceSampling, 0.0.into())
        )
        .is_err());
        assert!(apply_scenario_treatment(
            &base,
            &treatment(TreatmentKind::ScrapeInterval, 0.25.into())
        )
        .is_err());
    }

    #[test]
    fn patch_descriptors_for_builtin_kinds() {
        let t = treatment(TreatmentKind::TraceSampling, 0.5.into());
        let p = t.patch_descriptor().unwrap();
        assert!(p.target.contains("otel-collector"));
        assert_eq!(p.value, "50");

        let t = treatment(TreatmentKind::ScrapeInterval, 5.into());
        assert_eq!(t.patch_descriptor().unwrap().value, "5s");
    }

    #[test]
    fn scenario_validation() {
        let mut s = ScenarioConfig::default();
        s.validate().unwrap();
        s.trace_sampling_rate = 0.0;
        assert!(s.validate().is_err());

        let mut s = ScenarioConfig::default();
        s.duration_minutes = 5.0; // 300 s < 600 s of trims
        assert!(s.validate().is_err());

        let mut s = ScenarioConfig::default();
        s.scrape_interval_s = 0.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn virtual_users_scale_request_rate() {
        let mut s = ScenarioConfig::default();
        assert_eq!(s.request_rate_per_s(), 750.0);
        s.virtual_users = 0;
        assert_eq!(s.request_rate_per_s(), 0.0);
    }
}
