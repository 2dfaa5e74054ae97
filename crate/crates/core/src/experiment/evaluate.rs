//! Per-run energy evaluation: usage vectors -> per-container, per-service,
//! per-group and total energy, plus derived KPIs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::{
    self, container_energy, energy_per_trace, project_to_period, service_energy,
    underestimation_ratio, AttributionMode, EnergyBreakdown, EnergyIntensityConfig, UsageVector,
};
use crate::ingest::NetworkDirection;
use crate::topology::{ContainerId, ServiceId, ServiceRole, ServiceTopology};
use crate::units::THIRTY_DAYS_MS;

use super::ExperimentError;

pub const GROUP_PRIMARY: &str = "primary";
pub const GROUP_AUXILIARY: &str = "auxiliary";

/// Intensity values as applied, recorded for provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitiesUsed {
    pub network_kwh_per_gb: f64,
    pub storage_kwh_per_gb: f64,
    pub retention_days: f64,
    pub reference_year: i32,
    pub network_direction: NetworkDirection,
}

/// Component-wise sum over attributed containers plus the system term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TotalSummary {
    #[serde(flatten)]
    pub breakdown: EnergyBreakdown,
    pub e_system_j: f64,
}

impl TotalSummary {
    pub fn e_total_j(&self) -> f64 {
        self.breakdown.e_total_j() + self.e_system_j
    }

    pub fn e_total_wh(&self) -> f64 {
        crate::units::joules_to_wh(self.e_total_j())
    }
}

/// 30-day linear projection of one service's data footprint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionEntry {
    pub storage_bytes: f64,
    pub network_bytes: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Kpis {
    pub traces: f64,
    pub requests: f64,
    pub metric_samples: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wh_per_trace: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underestimation_ratio_total: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underestimation_ratio_auxiliary: Option<f64>,
    /// Per-service 30-day projection of stored and transferred bytes.
    pub projection_30d: BTreeMap<ServiceId, ProjectionEntry>,
}

/// A full per-run energy evaluation, the content of `energy.json`.
///
/// `services` sums over full membership (a dual-membership sidecar counts in
/// each of its services); `groups` uses the owner partition so group sums
/// reconcile exactly with the container sum in `total`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub attribution_mode: AttributionMode,
    pub intensities: IntensitiesUsed,
    pub containers: BTreeMap<ContainerId, EnergyBreakdown>,
    pub services: BTreeMap<ServiceId, EnergyBreakdown>,
    /// Group label (role) of each service.
    pub service_roles: BTreeMap<ServiceId, String>,
    pub groups: BTreeMap<String, EnergyBreakdown>,
    pub composed: BTreeMap<String, EnergyBreakdown>,
    /// Energy of containers not attributable to any service.
    pub system_j: f64,
    /// Breakdown detail of the unattributed containers.
    pub system_detail: EnergyBreakdown,
    pub total: TotalSummary,
    pub kpis: Kpis,
    pub disclosures: Vec<String>,
}

/// Evaluate the model over per-container usage.
///
/// Usage entries whose container is absent from the topology feed the
/// system term instead of a service.
pub fn evaluate(
    usage: &BTreeMap<ContainerId, UsageVector>,
    topology: &ServiceTopology,
    intensities: &EnergyIntensityConfig,
    mode: AttributionMode,
    direction: NetworkDirection,
) -> Result<EnergyReport, ExperimentError> {
    topology.validate()?;

    let mut containers = BTreeMap::new();
    let mut attributed = BTreeMap::new();
    let mut system_detail = EnergyBreakdown::ZERO;
    for (cid, u) in usage {
        let b = container_energy(u, intensities)?;
        if topology.contains_container(cid) {
            attributed.insert(cid.clone(), b);
        } else {
            system_detail = system_detail.add(&b);
        }
        containers.insert(cid.clone(), b);
    }

    let mut services = BTreeMap::new();
    let mut service_roles = BTreeMap::new();
    for (sid, entry) in &topology.services {
        services.insert(sid.clone(), service_energy(topology, &attributed, sid)?);
        let label = match entry.role {
            ServiceRole::Primary => GROUP_PRIMARY,
            ServiceRole::Auxiliary => GROUP_AUXILIARY,
        };
        service_roles.insert(sid.clone(), label.to_string());
    }

    let mut groups = BTreeMap::new();
    groups.insert(GROUP_PRIMARY.to_string(), EnergyBreakdown::ZERO);
    groups.insert(GROUP_AUXILIARY.to_string(), EnergyBreakdown::ZERO);
    for (sid, members) in topology.owner_partition() {
        let role = topology.role(&sid).expect("validated topology");
        let key = match role {
            ServiceRole::Primary => GROUP_PRIMARY,
            ServiceRole::Auxiliary => GROUP_AUXILIARY,
        };
        for cid in members {
            let b = attributed.get(&cid).ok_or_else(|| {
                ExperimentError::Model(energy::ModelError::MissingContainer(
                    cid.clone(),
                    sid.clone(),
                ))
            })?;
            let entry = groups.get_mut(key).expect("groups preseeded");
            *entry = entry.add(b);
        }
    }

    let mut composed = BTreeMap::new();
    for (name, members) in &topology.composed {
        // union of member containers, counted once each
        let mut seen = std::collections::BTreeSet::new();
        let mut sum = EnergyBreakdown::ZERO;
        for sid in members {
            for cid in topology.members_of(sid) {
                if seen.insert(cid.clone()) {
                    if let Some(b) = attributed.get(&cid) {
                        sum = sum.add(b);
                    }
                }
            }
        }
        composed.insert(name.clone(), sum);
    }

    let attributed_sum = EnergyBreakdown::sum(attributed.values());
    let total = TotalSummary {
        breakdown: attributed_sum,
        e_system_j: system_detail.e_total_j(),
    };

    let traces: f64 = usage.values().map(|u| u.trace_count).sum();
    let requests: f64 = usage.values().map(|u| u.request_count).sum();
    let metric_samples: f64 = usage.values().map(|u| u.metric_count).sum();

    let aux = groups.get(GROUP_AUXILIARY).copied().unwrap_or(EnergyBreakdown::ZERO);
    let total_for_kpi = EnergyBreakdown {
        e_cpu_j: attributed_sum.e_cpu_j + system_detail.e_cpu_j,
        e_memory_j: attributed_sum.e_memory_j + system_detail.e_memory_j,
        e_network_j: attributed_sum.e_network_j + system_detail.e_network_j,
        e_storage_j: attributed_sum.e_storage_j + system_detail.e_storage_j,
    };

    let mut projection_30d = BTreeMap::new();
    for (sid, members) in topology.owner_partition() {
        let mut storage = 0.0;
        let mut network = 0.0;
        let mut any = false;
        for cid in members {
            if let Some(u) = usage.get(&cid) {
                let p = project_to_period(u, THIRTY_DAYS_MS)?;
                storage += p.storage_bytes;
                network += p.network_bytes;
                any = true;
            }
        }
        if any {
            projection_30d.insert(
                sid,
                ProjectionEntry {
                    storage_bytes: storage,
                    network_bytes: network,
                },
            );
        }
    }

    let kpis = Kpis {
        traces,
        requests,
        metric_samples,
        wh_per_trace: (traces > 0.0)
            .then(|| energy_per_trace(&total_for_kpi, traces))
            .transpose()?,
        underestimation_ratio_total: (total_for_kpi.e_total_j() > 0.0)
            .then(|| underestimation_ratio(&total_for_kpi))
            .transpose()?,
        underestimation_ratio_auxiliary: (aux.e_total_j() > 0.0)
            .then(|| underestimation_ratio(&aux))
            .transpose()?,
        projection_30d,
    };

    Ok(EnergyReport {
        attribution_mode: mode,
        intensities: IntensitiesUsed {
            network_kwh_per_gb: intensities.network_intensity.kwh_per_gb(),
            storage_kwh_per_gb: intensities.storage_intensity.kwh_per_gb(),
            retention_days: intensities.retention_days,
            reference_year: intensities.reference_year,
            network_direction: direction,
        },
        containers,
        services,
        service_roles,
        groups,
        composed,
        system_j: system_detail.e_total_j(),
        system_detail,
        total,
        kpis,
        disclosures: vec![
            "Network bytes are measured per container without packet tagging; \
             intra-cluster traffic may be counted at both endpoints, so network \
             energy can overestimate."
                .to_string(),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::ServiceRole;

    fn setup() -> (ServiceTopology, BTreeMap<ContainerId, UsageVector>, EnergyIntensityConfig) {
        let mut t = ServiceTopology::new();
        let front = t.add_service("frontend", ServiceRole::Primary);
        let es = t.add_service("elasticsearch", ServiceRole::Auxiliary);
        t.add_container("frontend-0", "n", "p1", &front);
        t.add_container("es-0", "n", "p2", &es);
        t.compose("observability", [es.clone()]);

        let mut usage = BTreeMap::new();
        usage.insert(
            ContainerId::from("frontend-0"),
            UsageVector {
                cpu_joules: 7200.0,
                memory_joules: 3600.0,
                network_bytes: 1e9,
                request_count: 1000.0,
                window_ms: 3_600_000,
                ..Default::default()
            },
        );
        usage.insert(
            ContainerId::from("es-0"),
            UsageVector {
                cpu_joules: 3600.0,
                memory_joules: 0.0,
                network_bytes: 1.563e10,
                storage_bytes: 6.2e9,
                trace_count: 8.4e6,
                window_ms: 3_600_000,
                ..Default::default()
            },
        );
        // unattributable node daemon
        usage.insert(
            ContainerId::from("node-daemon"),
            UsageVector {
                cpu_joules: 360.0,
                memory_joules: 180.0,
                window_ms: 3_600_000,
                ..Default::default()
            },
        );
        let intensities = EnergyIntensityConfig::derived(2025, 30.0).unwrap();
        (t, usage, intensities)
    }

    #[test]
    fn groups_partition_and_total_reconciles() {
        let (t, usage, ints) = setup();
        let report = evaluate(
            &usage,
            &t,
            &ints,
            AttributionMode::Apportioned,
            NetworkDirection::Both,
        )
        .unwrap();
        let group_sum = report.groups[GROUP_PRIMARY].e_total_j()
            + report.groups[GROUP_AUXILIARY].e_total_j();
        assert!((group_sum - report.total.breakdown.e_total_j()).abs() < 1e-9);
        assert!((report.system_j - 540.0).abs() < 1e-12);
        assert!(report.total.e_total_j() > group_sum);
    }

    #[test]
    fn kpis_match_model_ops() {
        let (t, usage, ints) = setup();
        let report = evaluate(
            &usage,
            &t,
            &ints,
            AttributionMode::Apportioned,
            NetworkDirection::Both,
        )
        .unwrap();
        let wpt = report.kpis.wh_per_trace.unwrap();
        assert!((wpt - report.total.e_total_wh() / 8.4e6).abs() < 1e-15);

        // storage projection: 6.2e9 bytes per hour over 720 h
        let proj = &report.kpis.projection_30d[&ServiceId::from("elasticsearch")];
        assert!((proj.storage_bytes - 6.2e9 * 720.0).abs() / (6.2e9 * 720.0) < 1e-12);

        let aux_ratio = report.kpis.underestimation_ratio_auxiliary.unwrap();
        assert!(aux_ratio > 0.9, "storage+network dominate: {aux_ratio}");
        assert!(!report.disclosures.is_empty());
    }

    #[test]
    fn composed_units_count_containers_once() {
        let (mut t, usage, ints) = setup();
        // also compose the same service twice over
        let es = ServiceId::from("elasticsearch");
        t.compose("doubled", [es.clone(), es.clone()]);
        let report = evaluate(
            &usage,
            &t,
            &ints,
            AttributionMode::Apportioned,
            NetworkDirection::Both,
        )
        .unwrap();
        assert_eq!(
            report.composed["doubled"],
            report.composed["observability"]
        );
    }

    #[test]
    fn missing_member_breakdown_is_an_error() {
        let (t, mut usage, ints) = setup();
        usage.remove(&ContainerId::from("es-0"));
        let err = evaluate(
            &usage,
            &t,
            &ints,
            AttributionMode::Apportioned,
            NetworkDirection::Both,
        )
        .unwrap_err();
        assert!(err.to_string().contains("es-0"));
    }
}
