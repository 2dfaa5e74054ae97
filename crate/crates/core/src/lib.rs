//! Service-level energy accounting engine and experimentation harness for
//! containerized microservice systems.
//!
//! The crate attributes operational energy (CPU, memory, network, storage)
//! to services composed of distributed containers, compares configuration
//! alternatives against baselines, and evaluates per-service energy from
//! metric data, either live-scraped or deterministically simulated.

pub mod energy;
pub mod experiment;
pub mod ingest;
pub mod report;
pub mod sim;
pub mod topology;
pub mod units;

pub use energy::{
    container_energy, energy_per_trace, extrapolate_network_intensity, project_to_period,
    service_energy, storage_intensity_for_retention, total_energy, underestimation_ratio,
    AttributionMode, EnergyBreakdown, EnergyIntensityConfig, ModelError, SystemEnergy,
    UsageVector,
};
pub use topology::{ContainerId, ServiceId, ServiceRole, ServiceTopology};
