//! Assembly of per-container usage vectors from counter series.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::energy::UsageVector;
use crate::topology::{ContainerId, ServiceTopology};

use super::mapping::{MetricMapping, NetworkDirection, UsageField};
use super::series::{counter_delta, CounterSeries, RunWindow};
use super::IngestError;

/// Synthetic container receiving everything that cannot be attributed to a
/// topology container; it feeds the unattributable system energy term.
pub const SYSTEM_CONTAINER: &str = "system";

/// Ingestion findings that accompany every build, present even when empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Counter resets observed per metric name.
    pub counter_resets: BTreeMap<String, u32>,
    /// Samples seen for metric names without a mapping rule.
    pub unmapped_metrics: BTreeMap<String, u64>,
    /// Containers found in metric labels but absent from the topology;
    /// their usage was routed to the synthetic system container.
    pub unattributed_containers: Vec<String>,
    /// Raw filesystem write volume per container (not storage energy).
    pub fs_write_bytes: BTreeMap<String, f64>,
    /// Raw filesystem read volume per container.
    pub fs_read_bytes: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutput {
    pub usage: BTreeMap<ContainerId, UsageVector>,
    pub diagnostics: Diagnostics,
}

/// Map counter series onto per-container usage vectors over the trimmed
/// window.
///
/// Storage bytes prefer a recorded persistent-volume size, then the
/// persistent-volume gauge, then the filesystem-usage growth. Containers
/// not present in the topology are routed to [`SYSTEM_CONTAINER`] and
/// reported, never dropped.
pub fn build_usage(
    series: &[CounterSeries],
    mapping: &MetricMapping,
    topology: &ServiceTopology,
    window: &RunWindow,
    pv_sizes: &BTreeMap<ContainerId, f64>,
    direction: NetworkDirection,
) -> Result<BuildOutput, IngestError> {
    mapping.validate()?;
    window.validate()?;

    let mut diag = Diagnostics::default();
    let window_ms = window.effective_duration_ms();

    // per-container accumulators: field -> value
    let mut acc: BTreeMap<ContainerId, BTreeMap<UsageField, f64>> = BTreeMap::new();
    let mut pv_gauge: BTreeMap<ContainerId, f64> = BTreeMap::new();
    let mut fs_gauge: BTreeMap<ContainerId, f64> = BTreeMap::new();

    for s in series {
        let Some(field) = mapping.field_for(&s.name) else {
            *diag.unmapped_metrics.entry(s.name.clone()).or_insert(0) +=
                s.samples.len() as u64;
            continue;
        };
        let raw = s
            .label(&mapping.container_label)
            .unwrap_or(SYSTEM_CONTAINER)
            .to_string();
        let cid = if topology.contains_container(&ContainerId(raw.clone())) {
            ContainerId(raw)
        } else {
            if raw != SYSTEM_CONTAINER && !diag.unattributed_containers.contains(&raw) {
                diag.unattributed_containers.push(raw);
            }
            ContainerId(SYSTEM_CONTAINER.into())
        };

        match field {
            UsageField::PvSizeBytes => {
                if let Some(v) = s.last_in_window(window) {
                    *pv_gauge.entry(cid).or_insert(0.0) += v;
                }
            }
            UsageField::FsUsageBytes => {
                if let Some(v) = s.gauge_growth(window) {
                    *fs_gauge.entry(cid).or_insert(0.0) += v;
                }
            }
            _ => {
                let d = counter_delta(s, window)?;
                if d.resets > 0 {
                    *diag.counter_resets.entry(s.name.clone()).or_insert(0) += d.resets;
                }
                *acc.entry(cid).or_default().entry(field).or_insert(0.0) += d.delta;
            }
        }
    }

    let mut usage = BTreeMap::new();
    let mut containers: Vec<ContainerId> = acc
        .keys()
        .chain(pv_gauge.keys())
        .chain(fs_gauge.keys())
        .cloned()
        .collect();
    containers.sort();
    containers.dedup();

    for cid in containers {
        let fields = acc.get(&cid).cloned().unwrap_or_default();
        let get = |f: UsageField| fields.get(&f).copied();

        let mut network_bytes = 0.0;
        for f in [UsageField::NetworkTxBytes, UsageField::NetworkRxBytes] {
            if direction.includes(f) {
                network_bytes += get(f).unwrap_or(0.0);
            }
        }

        let storage_bytes = if let Some(size) = pv_sizes.get(&cid) {
            *size
        } else if let Some(size) = pv_gauge.get(&cid) {
            *size
        } else if let Some(growth) = fs_gauge.get(&cid) {
            *growth
        } else {
            diag.notes
                .push(format!("{cid}: no storage signal, storage_bytes defaulted to 0"));
            0.0
        };

        for (f, name) in [
            (UsageField::CpuJoules, "cpu"),
            (UsageField::MemoryJoules, "memory"),
        ] {
            if get(f).is_none() {
                diag.notes
                    .push(format!("{cid}: no samples for mapped {name} metric, field 0"));
            }
        }

        if let Some(w) = get(UsageField::FsWriteBytes) {
            diag.fs_write_bytes.insert(cid.0.clone(), w);
        }
        if let Some(r) = get(UsageField::FsReadBytes) {
            diag.fs_read_bytes.insert(cid.0.clone(), r);
        }

        usage.insert(
            cid,
            UsageVector {
                cpu_joules: get(UsageField::CpuJoules).unwrap_or(0.0),
                memory_joules: get(UsageField::MemoryJoules).unwrap_or(0.0),
                network_bytes,
                storage_bytes,
                trace_count: get(UsageField::TraceCount).unwrap_or(0.0),
                metric_count: get(UsageField::MetricSampleCount).unwrap_or(0.0),
                request_count: get(UsageField::RequestCount).unwrap_or(0.0),
                window_ms,
            },
        );
    }

    Ok(BuildOutput {
        usage,
        diagnostics: diag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::ServiceRole;

    fn topology() -> ServiceTopology {
        let mut t = ServiceTopology::new();
        let es = t.add_service("elasticsearch", ServiceRole::Auxiliary);
        let pr = t.add_service("prometheus", ServiceRole::Auxiliary);
        t.add_container("es-0", "n", "es", &es);
        t.add_container("prom-0", "n", "prom", &pr);
        t
    }

    fn counter(name: &str, container: &str, points: &[(i64, f64)]) -> CounterSeries {
        let mut labels = BTreeMap::new();
        labels.insert("container".to_string(), container.to_string());
        CounterSeries::new(name, labels, points.to_vec()).unwrap()
    }

    fn window() -> RunWindow {
        RunWindow::new(0, 1_000_000, 0, 0).unwrap()
    }

    #[test]
    fn pv_size_wins_over_write_volume() {
        let series = vec![
            counter("container_fs_writes_bytes_total", "es-0", &[(1, 0.0), (2, 66e9)]),
            counter("container_pv_size_bytes", "es-0", &[(1, 1e9), (2, 6.2e9)]),
        ];
        let out = build_usage(
            &series,
            &MetricMapping::default(),
            &topology(),
            &window(),
            &BTreeMap::new(),
            NetworkDirection::Both,
        )
        .unwrap();
        let u = &out.usage[&ContainerId::from("es-0")];
        assert_eq!(u.storage_bytes, 6.2e9);
        assert_eq!(out.diagnostics.fs_write_bytes["es-0"], 66e9);
    }

    #[test]
    fn recorded_pv_size_wins_over_gauge() {
        let series = vec![counter("container_pv_size_bytes", "es-0", &[(1, 1e9), (2, 2e9)])];
        let mut pv = BTreeMap::new();
        pv.insert(ContainerId::from("es-0"), 6.2e9);
        let out = build_usage(
            &series,
            &MetricMapping::default(),
            &topology(),
            &window(),
            &pv,
            NetworkDirection::Both,
        )
        .unwrap();
        assert_eq!(out.usage[&ContainerId::from("es-0")].storage_bytes, 6.2e9);
    }

    #[test]
    fn fs_usage_growth_when_no_pv() {
        let series = vec![counter("container_fs_usage_bytes", "prom-0", &[(1, 0.0), (2, 6e7)])];
        let out = build_usage(
            &series,
            &MetricMapping::default(),
            &topology(),
            &window(),
            &BTreeMap::new(),
            NetworkDirection::Both,
        )
        .unwrap();
        assert_eq!(out.usage[&ContainerId::from("prom-0")].storage_bytes, 6e7);
    }

    #[test]
    fn missing_mapped_metric_yields_zero_with_note() {
        let series = vec![counter("container_fs_usage_bytes", "prom-0", &[(1, 0.0), (2, 1.0)])];
        let out = build_usage(
            &series,
            &MetricMapping::default(),
            &topology(),
            &window(),
            &BTreeMap::new(),
            NetworkDirection::Both,
        )
        .unwrap();
        let u = &out.usage[&ContainerId::from("prom-0")];
        assert_eq!(u.cpu_joules, 0.0);
        assert!(out.diagnostics.notes.iter().any(|n| n.contains("cpu")));
    }

    #[test]
    fn unknown_container_routed_to_system() {
        let series = vec![
            counter("kepler_container_cpu_joules_total", "mystery-7", &[(1, 0.0), (2, 500.0)]),
        ];
        let out = build_usage(
            &series,
            &MetricMapping::default(),
            &topology(),
            &window(),
            &BTreeMap::new(),
            NetworkDirection::Both,
        )
        .unwrap();
        assert_eq!(
            out.usage[&ContainerId::from(SYSTEM_CONTAINER)].cpu_joules,
            500.0
        );
        assert_eq!(out.diagnostics.unattributed_containers, vec!["mystery-7"]);
    }

    #[test]
    fn network_direction_filters_bytes() {
        let series = vec![
            counter("container_network_transmit_bytes_total", "es-0", &[(1, 0.0), (2, 100.0)]),
            counter("container_network_receive_bytes_total", "es-0", &[(1, 0.0), (2, 900.0)]),
        ];
        for (dir, expected) in [
            (NetworkDirection::Both, 1000.0),
            (NetworkDirection::Tx, 100.0),
            (NetworkDirection::Rx, 900.0),
        ] {
            let out = build_usage(
                &series,
                &MetricMapping::default(),
                &topology(),
                &window(),
                &BTreeMap::new(),
                dir,
            )
            .unwrap();
            assert_eq!(out.usage[&ContainerId::from("es-0")].network_bytes, expected);
        }
    }

    #[test]
    fn unmapped_metrics_counted_not_dropped_silently() {
        let series = vec![counter("go_goroutines_total", "es-0", &[(1, 0.0), (2, 5.0)])];
        let out = build_usage(
            &series,
            &MetricMapping::default(),
            &topology(),
            &window(),
            &BTreeMap::new(),
            NetworkDirection::Both,
        )
        .unwrap();
        assert_eq!(out.diagnostics.unmapped_metrics["go_goroutines_total"], 2);
        assert!(out.usage.is_empty());
    }
}
