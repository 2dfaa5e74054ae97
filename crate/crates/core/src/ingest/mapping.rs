//! Binding of metric names to usage-vector fields.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::IngestError;

/// The usage dimension a metric contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UsageField {
    CpuJoules,
    MemoryJoules,
    NetworkTxBytes,
    NetworkRxBytes,
    /// Raw write volume; diagnostics only, not storage energy.
    FsWriteBytes,
    /// Raw read volume; diagnostics only.
    FsReadBytes,
    /// Filesystem usage gauge; storage fallback when no persistent volume.
    FsUsageBytes,
    /// Persistent-volume size gauge; overrides filesystem usage for storage.
    PvSizeBytes,
    RequestCount,
    TraceCount,
    MetricSampleCount,
}

impl UsageField {
    pub fn is_gauge(self) -> bool {
        matches!(self, UsageField::FsUsageBytes | UsageField::PvSizeBytes)
    }
}

/// Which network directions count towards `network_bytes`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkDirection {
    Tx,
    Rx,
    /// Sending and receiving both count. Default.
    #[default]
    Both,
}

impl NetworkDirection {
    pub fn includes(self, field: UsageField) -> bool {
        match self {
            NetworkDirection::Tx => field == UsageField::NetworkTxBytes,
            NetworkDirection::Rx => field == UsageField::NetworkRxBytes,
            NetworkDirection::Both => {
                matches!(field, UsageField::NetworkTxBytes | UsageField::NetworkRxBytes)
            }
        }
    }
}

/// Metric-name to field bindings plus the label key identifying containers.
///
/// Each metric name binds to exactly one field; the map representation makes
/// conflicting double-bindings unrepresentable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricMapping {
    pub rules: BTreeMap<String, UsageField>,
    pub container_label: String,
}

impl Default for MetricMapping {
    fn default() -> Self {
        let mut rules = BTreeMap::new();
        rules.insert("kepler_container_cpu_joules_total".into(), UsageField::CpuJoules);
        rules.insert("kepler_container_memory_joules_total".into(), UsageField::MemoryJoules);
        rules.insert(
            "container_network_transmit_bytes_total".into(),
            UsageField::NetworkTxBytes,
        );
        rules.insert(
            "container_network_receive_bytes_total".into(),
            UsageField::NetworkRxBytes,
        );
        rules.insert("container_fs_writes_bytes_total".into(), UsageField::FsWriteBytes);
        rules.insert("container_fs_reads_bytes_total".into(), UsageField::FsReadBytes);
        rules.insert("container_fs_usage_bytes".into(), UsageField::FsUsageBytes);
        rules.insert("container_pv_size_bytes".into(), UsageField::PvSizeBytes);
        rules.insert("sue_requests_total".into(), UsageField::RequestCount);
        rules.insert("sue_traces_captured_total".into(), UsageField::TraceCount);
        rules.insert("sue_metric_samples_total".into(), UsageField::MetricSampleCount);
        MetricMapping {
            rules,
            container_label: "container".into(),
        }
    }
}

impl MetricMapping {
    pub fn field_for(&self, metric_name: &str) -> Option<UsageField> {
        self.rules.get(metric_name).copied()
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.container_label.is_empty() {
            return Err(IngestError::InvalidMapping(
                "container label key must not be empty".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_mapping_covers_all_fields() {
        let m = MetricMapping::default();
        m.validate().unwrap();
        for field in [
            UsageField::CpuJoules,
            UsageField::MemoryJoules,
            UsageField::NetworkTxBytes,
            UsageField::NetworkRxBytes,
            UsageField::FsUsageBytes,
            UsageField::PvSizeBytes,
            UsageField::RequestCount,
            UsageField::TraceCount,
            UsageField::MetricSampleCount,
        ] {
            assert!(
                m.rules.values().any(|f| *f == field),
                "no rule for {field:?}"
            );
        }
    }

    #[test]
    fn direction_filter() {
        assert!(NetworkDirection::Both.includes(UsageField::NetworkTxBytes));
        assert!(NetworkDirection::Both.includes(UsageField::NetworkRxBytes));
        assert!(NetworkDirection::Tx.includes(UsageField::NetworkTxBytes));
        assert!(!NetworkDirection::Tx.includes(UsageField::NetworkRxBytes));
        assert!(!NetworkDirection::Rx.includes(UsageField::NetworkTxBytes));
    }
}
