//! The modeled deployment: service topology and per-service resource
//! profiles.
//!
//! Coefficients are committed data, fitted offline against published
//! per-service measurements of the modeled deployment (14 primary services
//! plus an observability stack) so that the generate -> ingest -> model
//! pipeline reproduces those measurements. They are never recomputed at
//! runtime.
//!
//! Compute joules are split into a dynamic part, driven by per-service
//! activity, and a node-static pool apportioned across containers in
//! proportion to their dynamic draw in each interval; this mirrors how
//! rapl-based exporters attribute shared node power and reproduces the
//! small per-service shifts seen between scenarios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::topology::{ServiceId, ServiceRole, ServiceTopology};

/// Trace candidates produced per request across the instrumented call fan-out
/// (before head sampling).
pub const TRACE_CANDIDATES_PER_REQUEST: f64 = 56.0 / 9.0;

/// Node-static power pool apportioned over containers by dynamic share, W.
pub const STATIC_POOL_W: f64 = 21.894975582844683;

/// Dynamic draw of non-workload node processes, W; attributed to no service.
pub const SYSTEM_IDLE_W: f64 = 0.15;

/// Metric series scraped at the monitoring scrape interval.
pub const SERIES_VARIABLE: f64 = 131_040.0;
/// Metric series on fixed 60 s cadences regardless of the interval treatment.
pub const SERIES_FIXED: f64 = 10_620.0;

/// Fraction of compute joules attributed to CPU (the rest is memory).
pub const CPU_FRACTION: f64 = 0.72;

/// Network overhead factor a mesh sidecar adds on its pod's traffic.
pub const SIDECAR_NETWORK_FACTOR: f64 = 0.02;
/// Dynamic compute joules per request drawn by each mesh sidecar.
pub const SIDECAR_JOULES_PER_REQUEST: f64 = 0.0006816842105263158;

/// Per-interval metric-sample production rate (samples per second) for the
/// monitoring service at a given scrape-interval treatment value.
pub fn metric_samples_per_second(scrape_interval_s: f64) -> f64 {
    SERIES_VARIABLE / scrape_interval_s + SERIES_FIXED / 60.0
}

/// Linear activity drivers for one resource dimension.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    #[serde(default)]
    pub per_second: f64,
    #[serde(default)]
    pub per_request: f64,
    #[serde(default)]
    pub per_trace: f64,
    #[serde(default)]
    pub per_trace_candidate: f64,
    #[serde(default)]
    pub per_metric_sample: f64,
}

impl Rates {
    pub const ZERO: Rates = Rates {
        per_second: 0.0,
        per_request: 0.0,
        per_trace: 0.0,
        per_trace_candidate: 0.0,
        per_metric_sample: 0.0,
    };

    pub fn per_second(v: f64) -> Rates {
        Rates { per_second: v, ..Rates::ZERO }
    }

    pub fn amount(&self, activity: &Activity) -> f64 {
        self.per_second * activity.seconds
            + self.per_request * activity.requests
            + self.per_trace * activity.traces
            + self.per_trace_candidate * activity.trace_candidates
            + self.per_metric_sample * activity.metric_samples
    }

    pub fn scaled(&self, k: f64) -> Rates {
        Rates {
            per_second: self.per_second * k,
            per_request: self.per_request * k,
            per_trace: self.per_trace * k,
            per_trace_candidate: self.per_trace_candidate * k,
            per_metric_sample: self.per_metric_sample * k,
        }
    }

    pub fn is_valid(&self) -> bool {
        [
            self.per_second,
            self.per_request,
            self.per_trace,
            self.per_trace_candidate,
            self.per_metric_sample,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Activity totals over one interval (or window).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Activity {
    pub seconds: f64,
    pub requests: f64,
    pub trace_candidates: f64,
    pub traces: f64,
    pub metric_samples: f64,
}

/// Resource coefficients for one service's container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceProfile {
    /// Dynamic compute joules (CPU + memory before the split).
    pub compute_dyn_joules: Rates,
    /// Bytes on the wire (transmit + receive combined).
    pub network_bytes: Rates,
    /// Fraction of network bytes that are transmitted (rest received).
    pub tx_fraction: f64,
    /// Raw write volume to disk.
    pub fs_write_bytes: Rates,
    /// Raw read volume from disk.
    pub fs_read_bytes: Rates,
    /// Filesystem usage growth (gauge).
    pub fs_usage_bytes: Rates,
    /// Persistent-volume size growth (gauge); None when no PV is attached.
    pub pv_bytes: Option<Rates>,
    /// Relative amplitude of per-interval multiplicative noise.
    pub noise_amplitude: f64,
}

impl ServiceProfile {
    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("compute_dyn_joules", &self.compute_dyn_joules),
            ("network_bytes", &self.network_bytes),
            ("fs_write_bytes", &self.fs_write_bytes),
            ("fs_read_bytes", &self.fs_read_bytes),
            ("fs_usage_bytes", &self.fs_usage_bytes),
        ];
        for (name, r) in all {
            if !r.is_valid() {
                return Err(format!("{name} has negative or non-finite coefficients"));
            }
        }
        if let Some(pv) = &self.pv_bytes {
            if !pv.is_valid() {
                return Err("pv_bytes has negative or non-finite coefficients".into());
            }
        }
        if !(0.0..=1.0).contains(&self.tx_fraction) {
            return Err(format!("tx_fraction {} out of [0,1]", self.tx_fraction));
        }
        if !(0.0..0.05).contains(&self.noise_amplitude) {
            return Err(format!(
                "noise amplitude {} must be < 5% of signal",
                self.noise_amplitude
            ));
        }
        Ok(())
    }
}

const NOISE: f64 = 0.01;

fn primary(idle_w: f64, cpu_j_per_req: f64, net_b_per_req: f64) -> ServiceProfile {
    ServiceProfile {
        compute_dyn_joules: Rates {
            per_second: idle_w,
            per_request: cpu_j_per_req,
            ..Rates::ZERO
        },
        network_bytes: Rates {
            per_request: net_b_per_req,
            ..Rates::ZERO
        },
        tx_fraction: 0.5,
        fs_write_bytes: Rates {
            per_request: 4.0,
            ..Rates::ZERO
        },
        fs_read_bytes: Rates::ZERO,
        fs_usage_bytes: Rates {
            per_request: 2.0,
            ..Rates::ZERO
        },
        pv_bytes: None,
        noise_amplitude: NOISE,
    }
}

/// The committed coefficient set for the modeled deployment.
pub fn default_profiles() -> BTreeMap<ServiceId, ServiceProfile> {
    let mut p = BTreeMap::new();

    // primary services: (idle dynamic W, compute J/request, network B/request)
    let primaries: [(&str, f64, f64, f64); 14] = [
        ("frontend", 5.844768190269913, 0.018183723258617505, 888.8888888888889),
        ("frontend-proxy", 1.0253979281175285, 0.003190126887476755, 197.5308641975309),
        ("cart", 0.6562546739952183, 0.0020416812079851235, 49.38271604938272),
        ("checkout", 0.5332069226211149, 0.001658865981487913, 59.25925925925926),
        ("currency", 0.3691432541223103, 0.0011484456794916321, 29.62962962962963),
        ("email", 0.24609550274820685, 0.0007656304529944213, 19.75308641975309),
        ("payment", 0.32812733699760915, 0.0010208406039925618, 29.62962962962963),
        ("product-catalog", 0.574222839745816, 0.0017864710569869833, 69.1358024691358),
        ("quote", 0.26660346131055745, 0.0008294329907439564, 19.75308641975309),
        ("recommendation", 0.4921910054964137, 0.0015312609059888425, 59.25925925925926),
        ("shipping", 0.3486352955599597, 0.001084643141742097, 39.50617283950618),
        ("ad", 0.4511750883717126, 0.0014036558304897726, 49.38271604938272),
        ("image-provider", 0.38965121268466085, 0.001212248217241167, 128.39506172839506),
        ("accounting", 0.4101591712470114, 0.001276050754990702, 39.50617283950618),
    ];
    for (name, idle, jreq, breq) in primaries {
        p.insert(ServiceId::from(name), primary(idle, jreq, breq));
    }

    // trace store: indexing cost per captured trace, PV-backed with heavy
    // write amplification (raw writes far exceed retained bytes)
    p.insert(
        ServiceId::from("elasticsearch"),
        ServiceProfile {
            compute_dyn_joules: Rates {
                per_second: 0.4351975651273233,
                per_trace: 0.003858025537354155,
                ..Rates::ZERO
            },
            network_bytes: Rates {
                per_second: 607.407407407413,
                per_trace: 1860.0,
                ..Rates::ZERO
            },
            tx_fraction: 0.03,
            fs_write_bytes: Rates {
                per_trace: 7857.142857142857,
                ..Rates::ZERO
            },
            fs_read_bytes: Rates {
                per_trace: 2000.0,
                ..Rates::ZERO
            },
            fs_usage_bytes: Rates::ZERO,
            pv_bytes: Some(Rates {
                per_trace: 738.0952380952381,
                ..Rates::ZERO
            }),
            noise_amplitude: NOISE,
        },
    );

    p.insert(
        ServiceId::from("jaeger"),
        ServiceProfile {
            compute_dyn_joules: Rates {
                per_second: 0.1794538284157819,
                per_trace: 0.0014280358785519636,
                ..Rates::ZERO
            },
            network_bytes: Rates {
                per_second: 6832.955404383976,
                per_trace: 44.05571752510528,
                ..Rates::ZERO
            },
            tx_fraction: 0.6,
            fs_write_bytes: Rates::ZERO,
            fs_read_bytes: Rates::ZERO,
            fs_usage_bytes: Rates {
                per_trace: 5.0,
                ..Rates::ZERO
            },
            pv_bytes: None,
            noise_amplitude: NOISE,
        },
    );

    // collector sees every trace candidate regardless of the sampling rate;
    // exporting a sampled trace adds only marginal work
    p.insert(
        ServiceId::from("otel-collector"),
        ServiceProfile {
            compute_dyn_joules: Rates {
                per_second: 0.5878948121207164,
                per_trace_candidate: 0.0005039098389606141,
                per_trace: 0.00012220205058907993,
                ..Rates::ZERO
            },
            network_bytes: Rates {
                per_second: 79259.25925925927,
                per_trace_candidate: 322.69841269841265,
                ..Rates::ZERO
            },
            tx_fraction: 0.45,
            fs_write_bytes: Rates::ZERO,
            fs_read_bytes: Rates::ZERO,
            fs_usage_bytes: Rates {
                per_trace_candidate: 1.0,
                ..Rates::ZERO
            },
            pv_bytes: None,
            noise_amplitude: NOISE,
        },
    );

    // monitoring store: per-sample ingestion cost, disk usage but no PV
    p.insert(
        ServiceId::from("prometheus"),
        ServiceProfile {
            compute_dyn_joules: Rates {
                per_second: 0.1538021517519279,
                per_metric_sample: 3.33000333000333e-5,
                ..Rates::ZERO
            },
            network_bytes: Rates {
                per_metric_sample: 13.0,
                ..Rates::ZERO
            },
            tx_fraction: 0.08,
            fs_write_bytes: Rates {
                per_metric_sample: 9.0,
                ..Rates::ZERO
            },
            fs_read_bytes: Rates::ZERO,
            fs_usage_bytes: Rates {
                per_metric_sample: 7.059155724975293,
                ..Rates::ZERO
            },
            pv_bytes: None,
            noise_amplitude: NOISE,
        },
    );

    // aggregated remaining auxiliaries (log store, dashboards, feature
    // flags); PV grows with traffic-driven log volume
    p.insert(
        ServiceId::from("other-aux"),
        ServiceProfile {
            compute_dyn_joules: Rates {
                per_second: 3.486352955599597,
                ..Rates::ZERO
            },
            network_bytes: Rates {
                per_request: 19.75308641975309,
                ..Rates::ZERO
            },
            tx_fraction: 0.3,
            fs_write_bytes: Rates {
                per_request: 4500.0,
                ..Rates::ZERO
            },
            fs_read_bytes: Rates::ZERO,
            fs_usage_bytes: Rates::ZERO,
            pv_bytes: Some(Rates {
                per_request: 4016.3714439076757,
                ..Rates::ZERO
            }),
            noise_amplitude: NOISE,
        },
    );

    p
}

/// Profile applied to each injected mesh sidecar, derived from its pod's
/// owner profile: a fixed per-request proxy cost plus a fractional network
/// overhead on the pod's traffic.
pub fn sidecar_profile(owner: &ServiceProfile) -> ServiceProfile {
    ServiceProfile {
        compute_dyn_joules: Rates {
            per_request: SIDECAR_JOULES_PER_REQUEST,
            ..Rates::ZERO
        },
        network_bytes: owner.network_bytes.scaled(SIDECAR_NETWORK_FACTOR),
        tx_fraction: 0.5,
        fs_write_bytes: Rates::ZERO,
        fs_read_bytes: Rates::ZERO,
        fs_usage_bytes: Rates::ZERO,
        pv_bytes: None,
        noise_amplitude: NOISE,
    }
}

pub const MESH_SERVICE: &str = "istio-mesh";
pub const OBSERVABILITY_COMPOSED: &str = "observability";

/// The modeled deployment topology: 14 primary services, the observability
/// auxiliaries and an always-present (possibly empty) mesh service. With
/// `mesh_enabled` one sidecar container joins every pod; sidecars belong to
/// the mesh service and additionally to their pod's service.
pub fn default_topology(mesh_enabled: bool) -> ServiceTopology {
    let mut t = ServiceTopology::new();
    let profiles = default_profiles();
    let nodes = ["node-a", "node-b", "node-c"];

    let mut service_ids = Vec::new();
    for (i, sid) in profiles.keys().enumerate() {
        let role = match sid.0.as_str() {
            "elasticsearch" | "jaeger" | "otel-collector" | "prometheus" | "other-aux" => {
                ServiceRole::Auxiliary
            }
            _ => ServiceRole::Primary,
        };
        let id = t.add_service(sid.0.clone(), role);
        let node = nodes[i % nodes.len()];
        let pod = format!("{}-pod", sid.0);
        t.add_container(format!("{}-0", sid.0), node, pod, &id);
        service_ids.push(id);
    }

    let mesh = t.add_service(MESH_SERVICE, ServiceRole::Auxiliary);
    if mesh_enabled {
        let pods: Vec<(String, String, String, ServiceId)> = t
            .containers
            .iter()
            .map(|(cid, info)| (cid.0.clone(), info.node.clone(), info.pod.clone(), info.owner.clone()))
            .collect();
        for (cid, node, pod, owner) in pods {
            let sidecar = t.add_container(format!("{cid}-istio-proxy"), node, pod, &mesh);
            t.add_membership(&sidecar, &owner);
        }
    }

    t.compose(
        OBSERVABILITY_COMPOSED,
        ["elasticsearch", "jaeger", "otel-collector", "prometheus"]
            .into_iter()
            .map(ServiceId::from),
    );
    t
}

/// Container id of the service's single workload container.
pub fn container_of(service: &ServiceId) -> String {
    format!("{}-0", service.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profiles_are_valid() {
        for (sid, profile) in default_profiles() {
            profile.validate().unwrap_or_else(|e| panic!("{sid}: {e}"));
        }
    }

    #[test]
    fn topology_shape() {
        let t = default_topology(false);
        t.validate().unwrap();
        assert_eq!(t.services_with_role(ServiceRole::Primary).len(), 14);
        // four named observability services + aggregated rest + mesh
        assert_eq!(t.services_with_role(ServiceRole::Auxiliary).len(), 6);
        assert_eq!(t.container_count(), 19);
        assert!(t.members_of(&ServiceId::from(MESH_SERVICE)).is_empty());
    }

    #[test]
    fn mesh_doubles_containers_and_adds_dual_membership() {
        let base = default_topology(false);
        let meshed = default_topology(true);
        meshed.validate().unwrap();
        assert_eq!(meshed.container_count(), 2 * base.container_count());
        // a sidecar is a member of both the mesh service and its pod's service
        let frontend_members = meshed.members_of(&ServiceId::from("frontend"));
        assert_eq!(frontend_members.len(), 2);
        let mesh_members = meshed.members_of(&ServiceId::from(MESH_SERVICE));
        assert_eq!(mesh_members.len(), base.container_count());
        // owner partition still covers each container exactly once
        let part = meshed.owner_partition();
        let total: usize = part.values().map(|v| v.len()).sum();
        assert_eq!(total, meshed.container_count());
    }

    #[test]
    fn metric_volume_scales_with_scrape_interval() {
        let w = 3600.0;
        let base = metric_samples_per_second(60.0) * w;
        let high = metric_samples_per_second(5.0) * w;
        let ratio = high / base;
        assert!((ratio - 11.0).abs() < 0.5, "ratio {ratio}");
        assert!((base - 8.5e6).abs() / 8.5e6 < 0.01);
    }
}
