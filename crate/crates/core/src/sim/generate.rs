//! Deterministic generation of per-container metric streams.
//!
//! For every measurement interval the generator derives per-container
//! dynamic activity, apportions the node-static compute pool by dynamic
//! share, accumulates cumulative counters, and emits one exposition file
//! per source per scrape instant, together with exact ground-truth usage
//! vectors over the trimmed window. Identical (seed, config) produce
//! byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::energy::UsageVector;
use crate::ingest::{render_exposition, MetricSample, RunWindow};
use crate::topology::{ContainerId, ServiceTopology};

use super::profile::{
    self, container_of, default_profiles, default_topology, metric_samples_per_second,
    sidecar_profile, Activity, ServiceProfile, SYSTEM_IDLE_W, TRACE_CANDIDATES_PER_REQUEST,
};
use super::rng::{stable_seed, NoiseStream};
use super::{ScenarioConfig, SimError};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const PV_SIZES_FILE: &str = "pv_sizes.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCRAPE_DIR: &str = "scrapes";

/// Container emitting node-OS activity; absent from the topology on purpose
/// so ingestion routes it to the synthetic system container.
const NODE_DAEMON: &str = "node-daemon";

/// Fixed synthetic epoch; wall clocks never enter generated artifacts.
const BASE_EPOCH_MS: i64 = 1_750_000_000_000;

/// Relative amplitude of the per-repetition global measurement factor.
const RUN_FACTOR_AMPLITUDE: f64 = 0.0015;

#[derive(Debug, Clone)]
pub struct GeneratedRun {
    pub dir: PathBuf,
    pub window: RunWindow,
    pub topology: ServiceTopology,
    pub ground_truth: BTreeMap<ContainerId, UsageVector>,
    pub pv_sizes: BTreeMap<ContainerId, f64>,
    /// Relative path -> sha256 of every emitted artifact.
    pub manifest: BTreeMap<String, String>,
}

/// Cumulative counter state for one container (index 0 is the run start).
struct ContainerStream {
    pod: String,
    node: String,
    cpu_j: Vec<f64>,
    mem_j: Vec<f64>,
    tx_b: Vec<f64>,
    rx_b: Vec<f64>,
    fs_write_b: Vec<f64>,
    fs_read_b: Vec<f64>,
    fs_usage_b: Vec<f64>,
    pv_b: Option<Vec<f64>>,
}

impl ContainerStream {
    fn new(pod: &str, node: &str, points: usize, has_pv: bool) -> Self {
        let zeros = || vec![0.0; points];
        ContainerStream {
            pod: pod.to_string(),
            node: node.to_string(),
            cpu_j: zeros(),
            mem_j: zeros(),
            tx_b: zeros(),
            rx_b: zeros(),
            fs_write_b: zeros(),
            fs_read_b: zeros(),
            fs_usage_b: zeros(),
            pv_b: has_pv.then(zeros),
        }
    }
}

struct NoiseSet {
    compute: NoiseStream,
    network: NoiseStream,
    disk: NoiseStream,
}

/// Per-container profile map for the scenario's derived topology.
fn container_profiles(
    topology: &ServiceTopology,
) -> Result<BTreeMap<ContainerId, ServiceProfile>, SimError> {
    let profiles = default_profiles();
    let mut out = BTreeMap::new();
    for (cid, info) in &topology.containers {
        let profile = if let Some(p) = profiles.get(&info.owner) {
            p.clone()
        } else if info.owner.0 == profile::MESH_SERVICE {
            let owner_service = info
                .extra_services
                .iter()
                .next()
                .ok_or_else(|| SimError::InvalidProfile {
                    service: cid.0.clone(),
                    reason: "sidecar without a pod service".into(),
                })?;
            let owner_profile =
                profiles
                    .get(owner_service)
                    .ok_or_else(|| SimError::InvalidProfile {
                        service: owner_service.0.clone(),
                        reason: "no profile".into(),
                    })?;
            sidecar_profile(owner_profile)
        } else {
            return Err(SimError::InvalidProfile {
                service: info.owner.0.clone(),
                reason: "no profile".into(),
            });
        };
        profile
            .validate()
            .map_err(|reason| SimError::InvalidProfile {
                service: cid.0.clone(),
                reason,
            })?;
        out.insert(cid.clone(), profile);
    }
    Ok(out)
}

/// Generate the full metric stream set for one run into `out_dir`.
pub fn generate_run(
    scenario: &ScenarioConfig,
    out_dir: &Path,
    run_seed: u64,
) -> Result<GeneratedRun, SimError> {
    scenario.validate()?;
    if out_dir.exists() && fs::read_dir(out_dir)?.next().is_some() {
        return Err(SimError::OutputCollision(out_dir.to_path_buf()));
    }
    fs::create_dir_all(out_dir.join(SCRAPE_DIR))?;

    let topology = default_topology(scenario.mesh_enabled);
    let profiles = container_profiles(&topology)?;

    let dt = scenario.measurement_interval_s;
    let interval_ms = (dt * 1000.0).round() as i64;
    let n_intervals = (scenario.duration_s() / dt).round() as usize;
    if n_intervals < 2 {
        return Err(SimError::InvalidScenario(format!(
            "duration {} s yields fewer than two measurement intervals",
            scenario.duration_s()
        )));
    }
    let points = n_intervals + 1;

    let window = RunWindow {
        start_ms: BASE_EPOCH_MS,
        end_ms: BASE_EPOCH_MS + n_intervals as i64 * interval_ms,
        warmup_ms: (scenario.warmup_trim_s * 1000.0).round() as i64,
        cooldown_ms: (scenario.cooldown_trim_s * 1000.0).round() as i64,
    };

    let mut run_factor_stream = NoiseStream::new(
        stable_seed(run_seed, &["run-factor"]),
        RUN_FACTOR_AMPLITUDE,
    );
    let run_factor = run_factor_stream.factor();

    let request_rate = scenario.request_rate_per_s();
    let msample_rate = metric_samples_per_second(scenario.scrape_interval_s);

    let per_interval = Activity {
        seconds: dt,
        requests: request_rate * dt,
        trace_candidates: request_rate * dt * TRACE_CANDIDATES_PER_REQUEST,
        traces: request_rate * dt * TRACE_CANDIDATES_PER_REQUEST * scenario.trace_sampling_rate,
        metric_samples: msample_rate * dt,
    };

    let mut streams: BTreeMap<ContainerId, ContainerStream> = BTreeMap::new();
    let mut noise: BTreeMap<ContainerId, NoiseSet> = BTreeMap::new();
    for (cid, info) in &topology.containers {
        streams.insert(
            cid.clone(),
            ContainerStream::new(&info.pod, &info.node, points, profiles[cid].pv_bytes.is_some()),
        );
        noise.insert(
            cid.clone(),
            NoiseSet {
                compute: NoiseStream::new(
                    stable_seed(run_seed, &[&cid.0, "compute"]),
                    profiles[cid].noise_amplitude,
                ),
                network: NoiseStream::new(
                    stable_seed(run_seed, &[&cid.0, "network"]),
                    profiles[cid].noise_amplitude,
                ),
                disk: NoiseStream::new(
                    stable_seed(run_seed, &[&cid.0, "disk"]),
                    profiles[cid].noise_amplitude,
                ),
            },
        );
    }
    let mut node_daemon = ContainerStream::new("node-daemon", "node-a", points, false);
    let mut requests_cum = vec![0.0; points];
    let mut traces_cum = vec![0.0; points];
    let mut msamples_cum = vec![0.0; points];

    for k in 1..points {
        // dynamic compute first; the static pool is split by dynamic share
        let mut dyn_compute: BTreeMap<&ContainerId, f64> = BTreeMap::new();
        for (cid, profile) in &profiles {
            let f = noise.get_mut(cid).unwrap().compute.factor();
            dyn_compute.insert(cid, profile.compute_dyn_joules.amount(&per_interval) * f);
        }
        let dyn_total: f64 = dyn_compute.values().sum();
        let static_pool = profile::STATIC_POOL_W * dt * run_factor;

        for (cid, profile) in &profiles {
            let stream = streams.get_mut(cid).unwrap();
            let share = if dyn_total > 0.0 {
                dyn_compute[cid] / dyn_total
            } else {
                1.0 / profiles.len() as f64
            };
            let compute = dyn_compute[cid] * run_factor + static_pool * share;
            stream.cpu_j[k] = stream.cpu_j[k - 1] + compute * profile::CPU_FRACTION;
            stream.mem_j[k] = stream.mem_j[k - 1] + compute * (1.0 - profile::CPU_FRACTION);

            let ns = noise.get_mut(cid).unwrap();
            let net = profile.network_bytes.amount(&per_interval) * ns.network.factor() * run_factor;
            stream.tx_b[k] = stream.tx_b[k - 1] + net * profile.tx_fraction;
            stream.rx_b[k] = stream.rx_b[k - 1] + net * (1.0 - profile.tx_fraction);

            let disk_factor = ns.disk.factor() * run_factor;
            stream.fs_write_b[k] =
                stream.fs_write_b[k - 1] + profile.fs_write_bytes.amount(&per_interval) * disk_factor;
            stream.fs_read_b[k] =
                stream.fs_read_b[k - 1] + profile.fs_read_bytes.amount(&per_interval) * disk_factor;
            stream.fs_usage_b[k] =
                stream.fs_usage_b[k - 1] + profile.fs_usage_bytes.amount(&per_interval) * disk_factor;
            if let (Some(pv), Some(rates)) = (stream.pv_b.as_mut(), profile.pv_bytes.as_ref()) {
                pv[k] = pv[k - 1] + rates.amount(&per_interval) * disk_factor;
            }
        }

        node_daemon.cpu_j[k] =
            node_daemon.cpu_j[k - 1] + SYSTEM_IDLE_W * dt * run_factor * profile::CPU_FRACTION;
        node_daemon.mem_j[k] = node_daemon.mem_j[k - 1]
            + SYSTEM_IDLE_W * dt * run_factor * (1.0 - profile::CPU_FRACTION);

        requests_cum[k] = requests_cum[k - 1] + per_interval.requests;
        traces_cum[k] = traces_cum[k - 1] + per_interval.traces;
        msamples_cum[k] = msamples_cum[k - 1] + per_interval.metric_samples;
    }

    // boundary indices under the nearest-sample-inside rule
    let lo_idx = ((window.warmup_ms as f64) / interval_ms as f64).ceil() as usize;
    let hi_idx = ((window.end_ms - window.cooldown_ms - window.start_ms) as f64
        / interval_ms as f64)
        .floor() as usize;
    let truth_window_ms = ((hi_idx - lo_idx) as i64 * interval_ms) as u64;

    let frontend = ContainerId(container_of(&"frontend".into()));
    let otel = ContainerId(container_of(&"otel-collector".into()));
    let prometheus = ContainerId(container_of(&"prometheus".into()));

    let mut ground_truth = BTreeMap::new();
    let mut pv_sizes = BTreeMap::new();
    for (cid, s) in &streams {
        let delta = |v: &Vec<f64>| v[hi_idx] - v[lo_idx];
        let storage_bytes = match &s.pv_b {
            Some(pv) => pv[hi_idx],
            None => (s.fs_usage_b[hi_idx] - s.fs_usage_b[lo_idx]).max(0.0),
        };
        if let Some(pv) = &s.pv_b {
            pv_sizes.insert(cid.clone(), pv[hi_idx]);
        }
        ground_truth.insert(
            cid.clone(),
            UsageVector {
                cpu_joules: delta(&s.cpu_j),
                memory_joules: delta(&s.mem_j),
                network_bytes: delta(&s.tx_b) + delta(&s.rx_b),
                storage_bytes,
                trace_count: if *cid == otel { traces_cum[hi_idx] - traces_cum[lo_idx] } else { 0.0 },
                metric_count: if *cid == prometheus {
                    msamples_cum[hi_idx] - msamples_cum[lo_idx]
                } else {
                    0.0
                },
                request_count: if *cid == frontend {
                    requests_cum[hi_idx] - requests_cum[lo_idx]
                } else {
                    0.0
                },
                window_ms: truth_window_ms,
            },
        );
    }

    // emit scrape files
    let mut manifest = BTreeMap::new();
    for k in 0..points {
        let ts = window.start_ms + k as i64 * interval_ms;

        let mut kepler = Vec::new();
        let mut cadvisor = Vec::new();
        for (cid, s) in &streams {
            push_sample(&mut kepler, "kepler_container_cpu_joules_total", cid, s, ts, s.cpu_j[k]);
            push_sample(&mut kepler, "kepler_container_memory_joules_total", cid, s, ts, s.mem_j[k]);
            push_sample(&mut cadvisor, "container_network_transmit_bytes_total", cid, s, ts, s.tx_b[k]);
            push_sample(&mut cadvisor, "container_network_receive_bytes_total", cid, s, ts, s.rx_b[k]);
            push_sample(&mut cadvisor, "container_fs_writes_bytes_total", cid, s, ts, s.fs_write_b[k]);
            push_sample(&mut cadvisor, "container_fs_reads_bytes_total", cid, s, ts, s.fs_read_b[k]);
            push_sample(&mut cadvisor, "container_fs_usage_bytes", cid, s, ts, s.fs_usage_b[k]);
            if let Some(pv) = &s.pv_b {
                push_sample(&mut cadvisor, "container_pv_size_bytes", cid, s, ts, pv[k]);
            }
        }
        let nd_cid = ContainerId(NODE_DAEMON.into());
        push_sample(&mut kepler, "kepler_container_cpu_joules_total", &nd_cid, &node_daemon, ts, node_daemon.cpu_j[k]);
        push_sample(&mut kepler, "kepler_container_memory_joules_total", &nd_cid, &node_daemon, ts, node_daemon.mem_j[k]);

        let mut sue = Vec::new();
        push_count(&mut sue, "sue_requests_total", &frontend, ts, requests_cum[k]);
        push_count(&mut sue, "sue_traces_captured_total", &otel, ts, traces_cum[k]);
        push_count(&mut sue, "sue_metric_samples_total", &prometheus, ts, msamples_cum[k]);

        for (source, samples) in [("kepler", kepler), ("cadvisor", cadvisor), ("sue", sue)] {
            let rel = format!("{SCRAPE_DIR}/{source}-{ts}.prom");
            let body = with_headers(source, &samples);
            write_artifact(out_dir, &rel, body.as_bytes(), &mut manifest)?;
        }
    }

    let truth_doc = serde_json::json!({
        "window": window,
        "containers": ground_truth,
    });
    write_artifact(
        out_dir,
        GROUND_TRUTH_FILE,
        (serde_json::to_string_pretty(&truth_doc)? + "\n").as_bytes(),
        &mut manifest,
    )?;
    write_artifact(
        out_dir,
        PV_SIZES_FILE,
        (serde_json::to_string_pretty(&pv_sizes)? + "\n").as_bytes(),
        &mut manifest,
    )?;

    let manifest_doc = serde_json::json!({
        "seed": run_seed,
        "artifact_count": manifest.len(),
        "artifacts": manifest,
    });
    fs::write(
        out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest_doc)? + "\n",
    )?;

    Ok(GeneratedRun {
        dir: out_dir.to_path_buf(),
        window,
        topology,
        ground_truth,
        pv_sizes,
        manifest,
    })
}

fn push_sample(
    out: &mut Vec<MetricSample>,
    name: &str,
    cid: &ContainerId,
    stream: &ContainerStream,
    ts: i64,
    value: f64,
) {
    let mut labels = BTreeMap::new();
    labels.insert("container".to_string(), cid.0.clone());
    labels.insert("pod".to_string(), stream.pod.clone());
    labels.insert("node".to_string(), stream.node.clone());
    out.push(MetricSample {
        name: name.to_string(),
        labels,
        timestamp_ms: ts,
        value,
    });
}

fn push_count(out: &mut Vec<MetricSample>, name: &str, cid: &ContainerId, ts: i64, value: f64) {
    let mut labels = BTreeMap::new();
    labels.insert("container".to_string(), cid.0.clone());
    out.push(MetricSample {
        name: name.to_string(),
        labels,
        timestamp_ms: ts,
        value,
    });
}

fn with_headers(source: &str, samples: &[MetricSample]) -> String {
    let mut out = String::new();
    let mut seen = std::collections::BTreeSet::new();
    for s in samples {
        if seen.insert(s.name.clone()) {
            let kind = if s.name.ends_with("_total") { "counter" } else { "gauge" };
            let _ = writeln!(out, "# HELP {} {} metric emitted by {}", s.name, kind, source);
            let _ = writeln!(out, "# TYPE {} {}", s.name, kind);
        }
    }
    out.push_str(&render_exposition(samples));
    out
}

fn write_artifact(
    out_dir: &Path,
    rel: &str,
    bytes: &[u8],
    manifest: &mut BTreeMap<String, String>,
) -> Result<(), SimError> {
    fs::write(out_dir.join(rel), bytes)?;
    manifest.insert(rel.to_string(), hex::encode(Sha256::digest(bytes)));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn desk_scenario() -> ScenarioConfig {
        ScenarioConfig {
            duration_minutes: 7.0,
            measurement_interval_s: 6.0,
            warmup_trim_s: 42.0,
            cooldown_trim_s: 18.0,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn identical_seed_and_config_byte_identical() {
        let a = TempDir::new().unwrap();
        let b = TempDir::new().unwrap();
        let ra = generate_run(&desk_scenario(), a.path(), 7).unwrap();
        let rb = generate_run(&desk_scenario(), b.path(), 7).unwrap();
        assert_eq!(ra.manifest, rb.manifest);
        assert!(!ra.manifest.is_empty());

        let c = TempDir::new().unwrap();
        let rc = generate_run(&desk_scenario(), c.path(), 8).unwrap();
        assert_ne!(ra.manifest, rc.manifest);
    }

    #[test]
    fn sampling_rate_scales_traces_about_fiftyfold() {
        let a = TempDir::new().unwrap();
        let base = generate_run(&desk_scenario(), a.path(), 1).unwrap();
        let mut high_cfg = desk_scenario();
        high_cfg.trace_sampling_rate = 0.5;
        let b = TempDir::new().unwrap();
        let high = generate_run(&high_cfg, b.path(), 1).unwrap();

        let traces = |run: &GeneratedRun| -> f64 {
            run.ground_truth
                .values()
                .map(|u| u.trace_count)
                .sum()
        };
        let ratio = traces(&high) / traces(&base);
        assert!((ratio - 50.0).abs() < 1.0, "ratio {ratio}");
    }

    #[test]
    fn scrape_interval_scales_metric_samples_about_elevenfold() {
        let a = TempDir::new().unwrap();
        let base = generate_run(&desk_scenario(), a.path(), 1).unwrap();
        let mut high_cfg = desk_scenario();
        high_cfg.scrape_interval_s = 5.0;
        let b = TempDir::new().unwrap();
        let high = generate_run(&high_cfg, b.path(), 1).unwrap();

        let samples = |run: &GeneratedRun| -> f64 {
            run.ground_truth.values().map(|u| u.metric_count).sum()
        };
        let ratio = samples(&high) / samples(&base);
        assert!((ratio - 11.2).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn zero_virtual_users_idle_and_scrape_only() {
        let mut cfg = desk_scenario();
        cfg.virtual_users = 0;
        let dir = TempDir::new().unwrap();
        let run = generate_run(&cfg, dir.path(), 1).unwrap();
        let total_requests: f64 = run.ground_truth.values().map(|u| u.request_count).sum();
        let total_traces: f64 = run.ground_truth.values().map(|u| u.trace_count).sum();
        assert_eq!(total_requests, 0.0);
        assert_eq!(total_traces, 0.0);
        // scrape traffic and idle energy remain
        let prom = &run.ground_truth[&ContainerId::from("prometheus-0")];
        assert!(prom.metric_count > 0.0);
        assert!(prom.network_bytes > 0.0);
        let frontend = &run.ground_truth[&ContainerId::from("frontend-0")];
        assert!(frontend.cpu_joules > 0.0);
        assert_eq!(frontend.network_bytes, 0.0);
        // traffic-driven log storage is absent
        let other = &run.ground_truth[&ContainerId::from("other-aux-0")];
        assert_eq!(other.storage_bytes, 0.0);
    }

    #[test]
    fn mesh_scenario_emits_sidecar_streams() {
        let mut cfg = desk_scenario();
        cfg.mesh_enabled = true;
        let dir = TempDir::new().unwrap();
        let run = generate_run(&cfg, dir.path(), 1).unwrap();
        assert!(run
            .ground_truth
            .contains_key(&ContainerId::from("frontend-0-istio-proxy")));
        assert_eq!(run.ground_truth.len(), 38);
    }

    #[test]
    fn collision_detected() {
        let dir = TempDir::new().unwrap();
        generate_run(&desk_scenario(), dir.path(), 1).unwrap();
        let err = generate_run(&desk_scenario(), dir.path(), 1).unwrap_err();
        assert!(matches!(err, SimError::OutputCollision(_)));
    }
}
