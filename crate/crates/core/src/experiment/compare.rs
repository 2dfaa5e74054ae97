//! Cross-scenario aggregation and baseline comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::EnergyBreakdown;
use crate::units::joules_to_wh;

use super::evaluate::EnergyReport;
use super::stats::{aggregate, Aggregate};
use super::ExperimentError;

/// Row identity in summaries: a service within its accounting group, or an
/// `ALL` aggregate row.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityKey {
    pub group: String,
    pub service: String,
}

impl EntityKey {
    pub fn service(group: &str, service: &str) -> Self {
        EntityKey {
            group: group.into(),
            service: service.into(),
        }
    }

    pub fn group_all(group: &str) -> Self {
        EntityKey {
            group: group.into(),
            service: "ALL".into(),
        }
    }

    /// Stable string form used as a JSON map key.
    pub fn flat(&self) -> String {
        format!("{}:{}", self.group, self.service)
    }
}

/// Per-component aggregates for one entity, in watt-hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentAggregates {
    pub e_cpu: Aggregate,
    pub e_memory: Aggregate,
    pub e_network: Aggregate,
    pub e_storage: Aggregate,
    pub e_compute: Aggregate,
    pub e_total: Aggregate,
}

/// KPI aggregates for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiAggregates {
    pub traces: Aggregate,
    pub requests: Aggregate,
    pub metric_samples: Aggregate,
    pub wh_per_trace: Option<Aggregate>,
    pub underestimation_ratio_total: Option<Aggregate>,
    pub underestimation_ratio_auxiliary: Option<Aggregate>,
    /// Per-service mean 30-day projections.
    pub projection_30d: BTreeMap<String, ProjectionAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionAggregate {
    pub storage_bytes: Aggregate,
    pub network_bytes: Aggregate,
}

/// One scenario's statistics over its repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub scenario: String,
    pub reps: usize,
    pub entities: BTreeMap<EntityKey, ComponentAggregates>,
    pub kpis: KpiAggregates,
}

fn wh_rows(b: &EnergyBreakdown) -> [f64; 6] {
    [
        joules_to_wh(b.e_cpu_j),
        joules_to_wh(b.e_memory_j),
        joules_to_wh(b.e_network_j),
        joules_to_wh(b.e_storage_j),
        joules_to_wh(b.e_compute_j()),
        joules_to_wh(b.e_total_j()),
    ]
}

/// Entity rows extracted from one run: services, group aggregates, the
/// system row and the grand total.
fn entity_rows(report: &EnergyReport) -> BTreeMap<EntityKey, [f64; 6]> {
    let mut rows = BTreeMap::new();
    for (sid, b) in &report.services {
        let group = report
            .service_roles
            .get(sid)
            .map(String::as_str)
            .unwrap_or("unknown");
        rows.insert(EntityKey::service(group, &sid.0), wh_rows(b));
    }
    for (group, b) in &report.groups {
        rows.insert(EntityKey::group_all(group), wh_rows(b));
    }
    rows.insert(EntityKey::group_all("system"), wh_rows(&report.system_detail));
    let grand = report.total.breakdown.add(&report.system_detail);
    rows.insert(EntityKey::group_all("total"), wh_rows(&grand));
    rows
}

/// Aggregate one scenario's repetitions into mean +/- CI rows.
pub fn scenario_aggregate(name: &str, reports: &[EnergyReport]) -> ScenarioAggregate {
    assert!(!reports.is_empty(), "scenario {name} has no reports");
    let per_run_rows: Vec<BTreeMap<EntityKey, [f64; 6]>> =
        reports.iter().map(entity_rows).collect();

    let mut entities = BTreeMap::new();
    for key in per_run_rows[0].keys() {
        let series: Vec<[f64; 6]> = per_run_rows
            .iter()
            .map(|rows| rows.get(key).copied().unwrap_or([0.0; 6]))
            .collect();
        let col = |i: usize| aggregate(&series.iter().map(|r| r[i]).collect::<Vec<_>>());
        entities.insert(
            key.clone(),
            ComponentAggregates {
                e_cpu: col(0),
                e_memory: col(1),
                e_network: col(2),
                e_storage: col(3),
                e_compute: col(4),
                e_total: col(5),
            },
        );
    }

    let collect = |f: &dyn Fn(&EnergyReport) -> f64| -> Vec<f64> {
        reports.iter().map(f).collect()
    };
    let opt_collect = |f: &dyn Fn(&EnergyReport) -> Option<f64>| -> Option<Aggregate> {
        let values: Vec<f64> = reports.iter().filter_map(f).collect();
        (values.len() == reports.len()).then(|| aggregate(&values))
    };

    let mut projection_30d = BTreeMap::new();
    for (sid, _) in &reports[0].kpis.projection_30d {
        let storage: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.kpis.projection_30d.get(sid).map(|p| p.storage_bytes))
            .collect();
        let network: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.kpis.projection_30d.get(sid).map(|p| p.network_bytes))
            .collect();
        if storage.len() == reports.len() {
            projection_30d.insert(
                sid.0.clone(),
                ProjectionAggregate {
                    storage_bytes: aggregate(&storage),
                    network_bytes: aggregate(&network),
                },
            );
        }
    }

    ScenarioAggregate {
        scenario: name.to_string(),
        reps: reports.len(),
        entities,
        kpis: KpiAggregates {
            traces: aggregate(&collect(&|r| r.kpis.traces)),
            requests: aggregate(&collect(&|r| r.kpis.requests)),
            metric_samples: aggregate(&collect(&|r| r.kpis.metric_samples)),
            wh_per_trace: opt_collect(&|r| r.kpis.wh_per_trace),
            underestimation_ratio_total: opt_collect(&|r| r.kpis.underestimation_ratio_total),
            underestimation_ratio_auxiliary: opt_collect(&|r| {
                r.kpis.underestimation_ratio_auxiliary
            }),
            projection_30d,
        },
    }
}

/// One compared quantity: baseline and treatment mean +/- CI with absolute
/// and relative deltas. The relative delta is flagged (absent), not
/// infinite, when the baseline mean is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub baseline_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_ci95: Option<f64>,
    pub treatment_mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment_ci95: Option<f64>,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_pct: Option<f64>,
}

impl DeltaRow {
    fn new(base: &Aggregate, treat: &Aggregate) -> Self {
        let delta = treat.mean - base.mean;
        DeltaRow {
            baseline_mean: base.mean,
            baseline_ci95: base.ci95_half_width,
            treatment_mean: treat.mean,
            treatment_ci95: treat.ci95_half_width,
            delta,
            delta_pct: (base.mean != 0.0).then(|| delta / base.mean * 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiComparison {
    pub grand_total_wh: DeltaRow,
    pub network_total_wh: DeltaRow,
    pub auxiliary_total_wh: DeltaRow,
    pub traces: DeltaRow,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wh_per_trace: Option<DeltaRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underestimation_ratio_auxiliary: Option<DeltaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentComparison {
    pub reps_baseline: usize,
    pub reps_treatment: usize,
    /// `group:service` -> component -> delta row, in watt-hours.
    pub entities: BTreeMap<String, BTreeMap<String, DeltaRow>>,
    pub kpis: KpiComparison,
}

/// The archived comparison document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub baseline: String,
    /// CI construction method, recorded because the repetition count is
    /// small: two-sided Student's t with n-1 degrees of freedom.
    pub ci_method: String,
    pub treatments: BTreeMap<String, TreatmentComparison>,
}

pub const CI_METHOD: &str = "student_t_two_sided_95";

/// Compare one treatment against the baseline aggregate.
pub fn compare(
    baseline: &ScenarioAggregate,
    treatment: &ScenarioAggregate,
) -> Result<TreatmentComparison, ExperimentError> {
    let base_keys: Vec<&EntityKey> = baseline.entities.keys().collect();
    let treat_keys: Vec<&EntityKey> = treatment.entities.keys().collect();
    if base_keys != treat_keys {
        let asym: Vec<String> = baseline
            .entities
            .keys()
            .filter(|k| !treatment.entities.contains_key(*k))
            .chain(treatment.entities.keys().filter(|k| !baseline.entities.contains_key(*k)))
            .map(|k| k.flat())
            .collect();
        return Err(ExperimentError::MismatchedServices(asym));
    }

    let mut entities = BTreeMap::new();
    for (key, base) in &baseline.entities {
        let treat = &treatment.entities[key];
        let mut comps = BTreeMap::new();
        comps.insert("e_cpu_wh".into(), DeltaRow::new(&base.e_cpu, &treat.e_cpu));
        comps.insert("e_memory_wh".into(), DeltaRow::new(&base.e_memory, &treat.e_memory));
        comps.insert("e_network_wh".into(), DeltaRow::new(&base.e_network, &treat.e_network));
        comps.insert("e_storage_wh".into(), DeltaRow::new(&base.e_storage, &treat.e_storage));
        comps.insert("e_compute_wh".into(), DeltaRow::new(&base.e_compute, &treat.e_compute));
        comps.insert("e_total_wh".into(), DeltaRow::new(&base.e_total, &treat.e_total));
        entities.insert(key.flat(), comps);
    }

    let total_key = EntityKey::group_all("total");
    let aux_key = EntityKey::group_all("auxiliary");
    let kpis = KpiComparison {
        grand_total_wh: DeltaRow::new(
            &baseline.entities[&total_key].e_total,
            &treatment.entities[&total_key].e_total,
        ),
        network_total_wh: DeltaRow::new(
            &baseline.entities[&total_key].e_network,
            &treatment.entities[&total_key].e_network,
        ),
        auxiliary_total_wh: DeltaRow::new(
            &baseline.entities[&aux_key].e_total,
            &treatment.entities[&aux_key].e_total,
        ),
        traces: DeltaRow::new(&baseline.kpis.traces, &treatment.kpis.traces),
        wh_per_trace: match (&baseline.kpis.wh_per_trace, &treatment.kpis.wh_per_trace) {
            (Some(b), Some(t)) => Some(DeltaRow::new(b, t)),
            _ => None,
        },
        underestimation_ratio_auxiliary: match (
            &baseline.kpis.underestimation_ratio_auxiliary,
            &treatment.kpis.underestimation_ratio_auxiliary,
        ) {
            (Some(b), Some(t)) => Some(DeltaRow::new(b, t)),
            _ => None,
        },
    };

    Ok(TreatmentComparison {
        reps_baseline: baseline.reps,
        reps_treatment: treatment.reps,
        entities,
        kpis,
    })
}

/// Build the full comparison report: every non-baseline scenario against the
/// baseline.
pub fn build_comparison(
    aggregates: &[ScenarioAggregate],
    baseline_name: &str,
) -> Result<ComparisonReport, ExperimentError> {
    let baseline = aggregates
        .iter()
        .find(|a| a.scenario == baseline_name)
        .ok_or_else(|| ExperimentError::Archive(format!("no baseline {baseline_name} in archive")))?;
    let mut treatments = BTreeMap::new();
    for agg in aggregates.iter().filter(|a| a.scenario != baseline_name) {
        treatments.insert(agg.scenario.clone(), compare(baseline, agg)?);
    }
    Ok(ComparisonReport {
        baseline: baseline_name.to_string(),
        ci_method: CI_METHOD.to_string(),
        treatments,
    })
}
