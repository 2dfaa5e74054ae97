//! Service-level energy model.
//!
//! Per-container energy is the sum of four component energies: CPU and
//! memory are directly accountable (measured joules), network and storage
//! are indirect and converted from byte volumes via energy intensities.
//! Service energy sums over member containers; system totals add an
//! unattributable system term. All operations are pure functions over
//! immutable inputs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{ContainerId, ServiceId, ServiceTopology};
use crate::units::{self, JoulesPerByte, JOULES_PER_WH};

/// Network intensity anchor: 0.06 kWh/GB in 2015, halving every two years.
const NETWORK_INTENSITY_2015_KWH_PER_GB: f64 = 0.06;
const NETWORK_INTENSITY_ANCHOR_YEAR: i32 = 2015;

/// Storing one GB for a full year costs 0.0046 kWh.
const STORAGE_INTENSITY_KWH_PER_GB_YEAR: f64 = 0.0046;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{field} must be finite and >= 0, got {value}")]
    InvalidValue { field: &'static str, value: f64 },
    #[error("usage window must have positive duration")]
    ZeroWindow,
    #[error("no energy breakdown for container {0} (member of service {1})")]
    MissingContainer(ContainerId, ServiceId),
    #[error("unknown service {0}")]
    UnknownService(ServiceId),
    #[error("subset is empty; literal attribution divides by its cardinality")]
    EmptySubset,
    #[error("underestimation ratio undefined: total energy is zero")]
    ZeroTotal,
    #[error("energy per trace undefined: trace count is zero")]
    ZeroTraces,
    #[error("projection period must be positive")]
    ZeroPeriod,
    #[error("network intensity extrapolation starts at {anchor}; got year {year}")]
    YearBeforeAnchor { year: i32, anchor: i32 },
    #[error("retention must be >= 0 days, got {0}")]
    NegativeRetention(f64),
}

/// How the unattributable system energy term is spread over services.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributionMode {
    /// Each service carries an equal share of system energy over the full
    /// service set, so summing every service recovers the system term
    /// exactly. Default.
    #[default]
    Apportioned,
    /// System energy divided by the cardinality of the queried subset.
    Literal,
}

/// Measured quantities for one container over a window.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UsageVector {
    pub cpu_joules: f64,
    pub memory_joules: f64,
    pub network_bytes: f64,
    pub storage_bytes: f64,
    #[serde(default)]
    pub trace_count: f64,
    #[serde(default)]
    pub metric_count: f64,
    #[serde(default)]
    pub request_count: f64,
    /// Duration the values cover, in milliseconds.
    pub window_ms: u64,
}

impl UsageVector {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("cpu_joules", self.cpu_joules),
            ("memory_joules", self.memory_joules),
            ("network_bytes", self.network_bytes),
            ("storage_bytes", self.storage_bytes),
            ("trace_count", self.trace_count),
            ("metric_count", self.metric_count),
            ("request_count", self.request_count),
        ];
        for (field, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(ModelError::InvalidValue { field, value });
            }
        }
        if self.window_ms == 0 {
            return Err(ModelError::ZeroWindow);
        }
        Ok(())
    }

    pub fn scaled(&self, factor: f64) -> UsageVector {
        UsageVector {
            cpu_joules: self.cpu_joules * factor,
            memory_joules: self.memory_joules * factor,
            network_bytes: self.network_bytes * factor,
            storage_bytes: self.storage_bytes * factor,
            trace_count: self.trace_count * factor,
            metric_count: self.metric_count * factor,
            request_count: self.request_count * factor,
            window_ms: self.window_ms,
        }
    }
}

/// Energy intensities with their provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyIntensityConfig {
    /// Canonical J/byte for network transfer.
    pub network_intensity: JoulesPerByte,
    /// Canonical J/byte for storing data over the configured retention.
    pub storage_intensity: JoulesPerByte,
    pub retention_days: f64,
    pub reference_year: i32,
}

impl EnergyIntensityConfig {
    /// Derive both intensities from a reference year and retention period.
    pub fn derived(reference_year: i32, retention_days: f64) -> Result<Self, ModelError> {
        let network_kwh_per_gb = extrapolate_network_intensity(reference_year)?;
        let storage_kwh_per_gb = storage_intensity_for_retention(retention_days)?;
        Ok(EnergyIntensityConfig {
            network_intensity: JoulesPerByte::from_kwh_per_gb(network_kwh_per_gb),
            storage_intensity: JoulesPerByte::from_kwh_per_gb(storage_kwh_per_gb),
            retention_days,
            reference_year,
        })
    }

    /// Explicit network intensity in kWh/GB, storage still derived from retention.
    pub fn with_network_kwh_per_gb(
        network_kwh_per_gb: f64,
        retention_days: f64,
        reference_year: i32,
    ) -> Result<Self, ModelError> {
        if !network_kwh_per_gb.is_finite() || network_kwh_per_gb < 0.0 {
            return Err(ModelError::InvalidValue {
                field: "network_kwh_per_gb",
                value: network_kwh_per_gb,
            });
        }
        let storage_kwh_per_gb = storage_intensity_for_retention(retention_days)?;
        Ok(EnergyIntensityConfig {
            network_intensity: JoulesPerByte::from_kwh_per_gb(network_kwh_per_gb),
            storage_intensity: JoulesPerByte::from_kwh_per_gb(storage_kwh_per_gb),
            retention_days,
            reference_year,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.network_intensity.is_valid() {
            return Err(ModelError::InvalidValue {
                field: "network_intensity",
                value: self.network_intensity.0,
            });
        }
        if !self.storage_intensity.is_valid() {
            return Err(ModelError::InvalidValue {
                field: "storage_intensity",
                value: self.storage_intensity.0,
            });
        }
        if self.retention_days < 0.0 {
            return Err(ModelError::NegativeRetention(self.retention_days));
        }
        if self.reference_year < NETWORK_INTENSITY_ANCHOR_YEAR {
            return Err(ModelError::YearBeforeAnchor {
                year: self.reference_year,
                anchor: NETWORK_INTENSITY_ANCHOR_YEAR,
            });
        }
        Ok(())
    }
}

/// Component energies in joules. The total is always derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_cpu_j: f64,
    pub e_memory_j: f64,
    pub e_network_j: f64,
    pub e_storage_j: f64,
}

impl EnergyBreakdown {
    pub const ZERO: EnergyBreakdown = EnergyBreakdown {
        e_cpu_j: 0.0,
        e_memory_j: 0.0,
        e_network_j: 0.0,
        e_storage_j: 0.0,
    };

    pub fn e_compute_j(&self) -> f64 {
        self.e_cpu_j + self.e_memory_j
    }

    pub fn e_total_j(&self) -> f64 {
        self.e_cpu_j + self.e_memory_j + self.e_network_j + self.e_storage_j
    }

    pub fn e_total_wh(&self) -> f64 {
        units::joules_to_wh(self.e_total_j())
    }

    pub fn add(&self, other: &EnergyBreakdown) -> EnergyBreakdown {
        EnergyBreakdown {
            e_cpu_j: self.e_cpu_j + other.e_cpu_j,
            e_memory_j: self.e_memory_j + other.e_memory_j,
            e_network_j: self.e_network_j + other.e_network_j,
            e_storage_j: self.e_storage_j + other.e_storage_j,
        }
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a EnergyBreakdown>) -> EnergyBreakdown {
        items
            .into_iter()
            .fold(EnergyBreakdown::ZERO, |acc, b| acc.add(b))
    }
}

/// Energy consumed by system processes not attributable to any service.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemEnergy {
    pub joules: f64,
    pub mode: AttributionMode,
}

impl SystemEnergy {
    pub fn new(joules: f64, mode: AttributionMode) -> Result<Self, ModelError> {
        if !joules.is_finite() || joules < 0.0 {
            return Err(ModelError::InvalidValue {
                field: "system_joules",
                value: joules,
            });
        }
        Ok(SystemEnergy { joules, mode })
    }

    pub fn zero() -> Self {
        SystemEnergy {
            joules: 0.0,
            mode: AttributionMode::Apportioned,
        }
    }
}

/// Total energy over a service subset: the component-wise service sum plus
/// the system share attributed under the recorded mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalEnergy {
    pub service_sum: EnergyBreakdown,
    pub system_share_j: f64,
    pub mode: AttributionMode,
}

impl TotalEnergy {
    pub fn e_total_j(&self) -> f64 {
        self.service_sum.e_total_j() + self.system_share_j
    }
}

/// Per-container energy from measured usage and configured intensities.
pub fn container_energy(
    usage: &UsageVector,
    intensities: &EnergyIntensityConfig,
) -> Result<EnergyBreakdown, ModelError> {
    usage.validate()?;
    intensities.validate()?;
    Ok(EnergyBreakdown {
        e_cpu_j: usage.cpu_joules,
        e_memory_j: usage.memory_joules,
        e_network_j: usage.network_bytes * intensities.network_intensity.0,
        e_storage_j: usage.storage_bytes * intensities.storage_intensity.0,
    })
}

/// Component-wise sum over every member container of the service.
///
/// A member without a breakdown entry is an explicit error, never a silent
/// zero.
pub fn service_energy(
    topology: &ServiceTopology,
    per_container: &BTreeMap<ContainerId, EnergyBreakdown>,
    service: &ServiceId,
) -> Result<EnergyBreakdown, ModelError> {
    if topology.role(service).is_none() {
        return Err(ModelError::UnknownService(service.clone()));
    }
    let mut sum = EnergyBreakdown::ZERO;
    for cid in topology.members_of(service) {
        let b = per_container
            .get(&cid)
            .ok_or_else(|| ModelError::MissingContainer(cid.clone(), service.clone()))?;
        sum = sum.add(b);
    }
    Ok(sum)
}

/// Total energy over a subset of services plus the system share.
pub fn total_energy(
    topology: &ServiceTopology,
    per_service: &BTreeMap<ServiceId, EnergyBreakdown>,
    subset: &BTreeSet<ServiceId>,
    system: &SystemEnergy,
) -> Result<TotalEnergy, ModelError> {
    let mut sum = EnergyBreakdown::ZERO;
    for sid in subset {
        if topology.role(sid).is_none() {
            return Err(ModelError::UnknownService(sid.clone()));
        }
        let b = per_service
            .get(sid)
            .ok_or_else(|| ModelError::UnknownService(sid.clone()))?;
        sum = sum.add(b);
    }
    let system_share_j = match system.mode {
        AttributionMode::Apportioned => {
            let all = topology.service_count();
            if all == 0 {
                0.0
            } else {
                subset.len() as f64 * system.joules / all as f64
            }
        }
        AttributionMode::Literal => {
            if subset.is_empty() {
                return Err(ModelError::EmptySubset);
            }
            system.joules / subset.len() as f64
        }
    };
    Ok(TotalEnergy {
        service_sum: sum,
        system_share_j,
        mode: system.mode,
    })
}

/// Share of total energy carried by network and storage: the fraction missed
/// by compute-only accounting. Always in [0, 1] for valid breakdowns.
pub fn underestimation_ratio(b: &EnergyBreakdown) -> Result<f64, ModelError> {
    let total = b.e_total_j();
    if total <= 0.0 {
        return Err(ModelError::ZeroTotal);
    }
    Ok((b.e_network_j + b.e_storage_j) / total)
}

/// Network energy intensity in kWh/GB for a reference year, anchored at
/// 0.06 kWh/GB in 2015 and halving every two years.
pub fn extrapolate_network_intensity(reference_year: i32) -> Result<f64, ModelError> {
    if reference_year < NETWORK_INTENSITY_ANCHOR_YEAR {
        return Err(ModelError::YearBeforeAnchor {
            year: reference_year,
            anchor: NETWORK_INTENSITY_ANCHOR_YEAR,
        });
    }
    let years = reference_year - NETWORK_INTENSITY_ANCHOR_YEAR;
    // whole halvings are exact powers of two; an odd year adds half a halving
    let halvings = years / 2;
    let intensity = NETWORK_INTENSITY_2015_KWH_PER_GB * 0.5f64.powi(halvings);
    Ok(if years % 2 == 1 {
        intensity * std::f64::consts::FRAC_1_SQRT_2
    } else {
        intensity
    })
}

/// Storage energy intensity in kWh/GB for keeping data the given number of
/// days, from the 0.0046 kWh/GB-year estimate.
pub fn storage_intensity_for_retention(retention_days: f64) -> Result<f64, ModelError> {
    if !retention_days.is_finite() || retention_days < 0.0 {
        return Err(ModelError::NegativeRetention(retention_days));
    }
    Ok(STORAGE_INTENSITY_KWH_PER_GB_YEAR * retention_days / 365.0)
}

/// Linear projection of all cumulative fields to an analytical period,
/// e.g. consumption over 30 days from a one-hour measurement.
pub fn project_to_period(usage: &UsageVector, period_ms: u64) -> Result<UsageVector, ModelError> {
    usage.validate()?;
    if period_ms == 0 {
        return Err(ModelError::ZeroPeriod);
    }
    let factor = period_ms as f64 / usage.window_ms as f64;
    let mut scaled = usage.scaled(factor);
    scaled.window_ms = period_ms;
    Ok(scaled)
}

/// Normalized KPI: watt-hours per captured trace.
pub fn energy_per_trace(total: &EnergyBreakdown, traces: f64) -> Result<f64, ModelError> {
    if !traces.is_finite() || traces <= 0.0 {
        return Err(ModelError::ZeroTraces);
    }
    Ok(total.e_total_j() / JOULES_PER_WH / traces)
}
