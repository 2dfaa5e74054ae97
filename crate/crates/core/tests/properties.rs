//! Property suites for the model invariants and the ingestion layer.

use std::collections::BTreeMap;

use proptest::prelude::*;

use servwatt_core::energy::{
    container_energy, extrapolate_network_intensity, total_energy, underestimation_ratio,
    AttributionMode, EnergyBreakdown, EnergyIntensityConfig, SystemEnergy, UsageVector,
};
use servwatt_core::ingest::{
    build_usage, counter_delta, group_into_series, parse_exposition, render_exposition,
    CounterSeries, MetricMapping, MetricSample, NetworkDirection, RunWindow, SYSTEM_CONTAINER,
};
use servwatt_core::topology::{ContainerId, ServiceRole, ServiceTopology};

fn arb_usage() -> impl Strategy<Value = UsageVector> {
    (
        0.0..1e9f64,
        0.0..1e9f64,
        0.0..1e13f64,
        0.0..1e12f64,
        0.0..1e7f64,
        1u64..10_000_000,
    )
        .prop_map(|(cpu, mem, net, st, traces, window)| UsageVector {
            cpu_joules: cpu,
            memory_joules: mem,
            network_bytes: net,
            storage_bytes: st,
            trace_count: traces,
            metric_count: 0.0,
            request_count: 0.0,
            window_ms: window,
        })
}

fn intensities() -> EnergyIntensityConfig {
    EnergyIntensityConfig::derived(2025, 30.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// Scaling every usage field by k scales every component by k.
    #[test]
    fn model_linearity(usage in arb_usage(), k in 0.0..1000.0f64) {
        let ints = intensities();
        let base = container_energy(&usage, &ints).unwrap();
        let scaled = container_energy(&usage.scaled(k), &ints).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1e-9);
        prop_assert!(close(scaled.e_cpu_j, base.e_cpu_j * k));
        prop_assert!(close(scaled.e_memory_j, base.e_memory_j * k));
        prop_assert!(close(scaled.e_network_j, base.e_network_j * k));
        prop_assert!(close(scaled.e_storage_j, base.e_storage_j * k));
    }

    /// Increasing any usage field never decreases total energy.
    #[test]
    fn model_monotonicity(usage in arb_usage(), bump in 0.0..1e9f64, field in 0usize..4) {
        let ints = intensities();
        let before = container_energy(&usage, &ints).unwrap().e_total_j();
        let mut bumped = usage.clone();
        match field {
            0 => bumped.cpu_joules += bump,
            1 => bumped.memory_joules += bump,
            2 => bumped.network_bytes += bump,
            _ => bumped.storage_bytes += bump,
        }
        let after = container_energy(&bumped, &ints).unwrap().e_total_j();
        prop_assert!(after >= before);
    }

    /// The network+storage share is always a valid fraction.
    #[test]
    fn ratio_in_unit_interval(usage in arb_usage()) {
        let b = container_energy(&usage, &intensities()).unwrap();
        if b.e_total_j() > 0.0 {
            let r = underestimation_ratio(&b).unwrap();
            prop_assert!((0.0..=1.0).contains(&r), "{r}");
        }
    }

    /// Network intensity halves exactly over any two-year step.
    #[test]
    fn intensity_halving(year in 2015i32..2100) {
        let a = extrapolate_network_intensity(year).unwrap();
        let b = extrapolate_network_intensity(year + 2).unwrap();
        prop_assert_eq!(b, a / 2.0);
    }

    /// Apportioned totals over any partition of the service set sum to the
    /// full-set total (service sums plus the whole system term).
    #[test]
    fn apportioned_partition_consistency(
        service_wh in prop::collection::vec(0.0..100.0f64, 1..8),
        system_wh in 0.0..50.0f64,
        split in 0usize..8,
    ) {
        let mut topology = ServiceTopology::new();
        let mut per_service = BTreeMap::new();
        let mut ids = Vec::new();
        for (i, wh) in service_wh.iter().enumerate() {
            let sid = topology.add_service(format!("svc-{i}"), ServiceRole::Primary);
            per_service.insert(sid.clone(), EnergyBreakdown {
                e_cpu_j: wh * 3600.0,
                ..EnergyBreakdown::ZERO
            });
            ids.push(sid);
        }
        let system = SystemEnergy::new(system_wh * 3600.0, AttributionMode::Apportioned).unwrap();

        let full: std::collections::BTreeSet<_> = ids.iter().cloned().collect();
        let total_full = total_energy(&topology, &per_service, &full, &system).unwrap();

        let cut = split.min(ids.len());
        let left: std::collections::BTreeSet<_> = ids[..cut].iter().cloned().collect();
        let right: std::collections::BTreeSet<_> = ids[cut..].iter().cloned().collect();
        let mut sum = 0.0;
        for subset in [left, right] {
            if subset.is_empty() {
                continue;
            }
            sum += total_energy(&topology, &per_service, &subset, &system)
                .unwrap()
                .e_total_j();
        }
        prop_assert!((sum - total_full.e_total_j()).abs() < 1e-6,
            "partition sum {sum} vs full {}", total_full.e_total_j());
        // full set recovers services + system exactly
        let expected = service_wh.iter().sum::<f64>() * 3600.0 + system_wh * 3600.0;
        prop_assert!((total_full.e_total_j() - expected).abs() < 1e-6);
    }
}

// -----------------------------------------------------------------------
// counter_delta properties
// -----------------------------------------------------------------------

/// Per-interval increments with occasional genuine resets (a reset drops
/// the counter strictly below its previous value). The oracle accumulates
/// the expected windowed delta independently of the windowing machinery:
/// plain increments count as-is, a post-reset value counts in full.
fn arb_counter_track() -> impl Strategy<Value = (Vec<(i64, f64)>, Vec<f64>)> {
    prop::collection::vec(
        (0.0..1e6f64, prop::option::weighted(0.08, 0.0..0.95f64)),
        2..60,
    )
    .prop_map(|steps| {
        let mut samples = Vec::new();
        let mut value = 0.0;
        let mut t = 1000i64;
        let mut increments = Vec::new();
        samples.push((t, value));
        for (inc, reset_fraction) in steps {
            t += 1000;
            match reset_fraction {
                Some(frac) => {
                    value *= frac;
                    increments.push(value);
                }
                None => {
                    value += inc;
                    increments.push(inc);
                }
            }
            samples.push((t, value));
        }
        (samples, increments)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// With resets counting their post-reset value in full, the windowed
    /// delta equals the sum of generated increments.
    #[test]
    fn counter_delta_reset_handling((samples, increments) in arb_counter_track()) {
        let series = CounterSeries::new("m", BTreeMap::new(), samples).unwrap();
        let window = RunWindow::new(0, i64::MAX / 2, 0, 0).unwrap();
        let got = counter_delta(&series, &window).unwrap();
        let expected: f64 = increments.iter().sum();
        prop_assert!((got.delta - expected).abs() <= 1e-6 * expected.max(1.0),
            "delta {} vs {}", got.delta, expected);
    }

    /// Appending samples outside the trimmed window never changes the delta.
    #[test]
    fn counter_delta_window_invariance(
        (samples, _) in arb_counter_track(),
        before in 0.0..1e9f64,
        after in 0.0..1e9f64,
    ) {
        let first = samples.first().unwrap().0;
        let last = samples.last().unwrap().0;
        let window = RunWindow::new(first - 1, last + 1, 0, 0).unwrap();
        let series = CounterSeries::new("m", BTreeMap::new(), samples.clone()).unwrap();
        let base = counter_delta(&series, &window).unwrap();

        let mut padded = samples;
        padded.insert(0, (first - 5000, before));
        padded.push((last + 5000, after));
        let series = CounterSeries::new("m", BTreeMap::new(), padded).unwrap();
        let got = counter_delta(&series, &window).unwrap();
        prop_assert_eq!(got.delta, base.delta);
    }

    /// Deltas are never negative.
    #[test]
    fn counter_delta_non_negative(values in prop::collection::vec(0.0..1e9f64, 2..50)) {
        let samples: Vec<(i64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, v)| ((i as i64 + 1) * 500, *v))
            .collect();
        let series = CounterSeries::new("m", BTreeMap::new(), samples).unwrap();
        let window = RunWindow::new(0, 1e9 as i64, 0, 0).unwrap();
        prop_assert!(counter_delta(&series, &window).unwrap().delta >= 0.0);
    }
}

// -----------------------------------------------------------------------
// exposition round-trip
// -----------------------------------------------------------------------

fn arb_metric_name() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,24}"
}

fn arb_label_value() -> impl Strategy<Value = String> {
    // printable values incl. the escapable characters
    prop::collection::vec(
        prop_oneof![
            prop::char::range('a', 'z').prop_map(|c| c),
            Just('"'),
            Just('\\'),
            Just('\n'),
            Just(' '),
            Just('{'),
            Just('}'),
        ],
        0..12,
    )
    .prop_map(|chars| chars.into_iter().collect())
}

fn arb_sample() -> impl Strategy<Value = MetricSample> {
    (
        arb_metric_name(),
        prop::collection::btree_map("[a-z][a-z0-9_]{0,8}", arb_label_value(), 0..4),
        1i64..2_000_000_000_000,
        -1e12f64..1e12,
    )
        .prop_map(|(name, labels, timestamp_ms, value)| MetricSample {
            name,
            labels,
            timestamp_ms,
            value,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    /// parse(render(samples)) round-trips normalized sample lists exactly.
    #[test]
    fn exposition_round_trip(samples in prop::collection::vec(arb_sample(), 0..12)) {
        let text = render_exposition(&samples);
        let parsed = parse_exposition(&text, 999).unwrap();
        prop_assert_eq!(parsed, samples);
    }
}

// -----------------------------------------------------------------------
// byte conservation through build_usage
// -----------------------------------------------------------------------

/// Random container names (some unknown to the topology), each with tx/rx
/// counter series; total network bytes must be conserved.
fn arb_network_fixture() -> impl Strategy<Value = Vec<(String, Vec<f64>, Vec<f64>)>> {
    prop::collection::vec(
        (
            "[a-z]{1,8}",
            prop::collection::vec(0.0..1e6f64, 2..10),
            prop::collection::vec(0.0..1e6f64, 2..10),
        ),
        1..8,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn build_usage_conserves_bytes(fixture in arb_network_fixture()) {
        let mut topology = ServiceTopology::new();
        let svc = topology.add_service("svc", ServiceRole::Primary);
        // every other container is known; the rest route to system
        for (i, (name, _, _)) in fixture.iter().enumerate() {
            if i % 2 == 0 {
                topology.add_container(name.clone(), "n", "p", &svc);
            }
        }

        let mut series = Vec::new();
        let mut expected_total = 0.0;
        for (name, tx_incs, rx_incs) in &fixture {
            for (metric, incs) in [
                ("container_network_transmit_bytes_total", tx_incs),
                ("container_network_receive_bytes_total", rx_incs),
            ] {
                let mut labels = BTreeMap::new();
                labels.insert("container".to_string(), name.clone());
                let mut cum = 0.0;
                let mut samples = vec![(1000i64, 0.0)];
                for (i, inc) in incs.iter().enumerate() {
                    cum += inc;
                    samples.push(((i as i64 + 2) * 1000, cum));
                }
                expected_total += cum;
                // merge duplicate label sets across fixture entries by
                // deduplicating names: suffix the metric timestamps instead
                series.push((metric, labels, samples));
            }
        }
        // collapse duplicates: identical (metric, labels) pairs merge their
        // cumulative tracks, which breaks strict monotonicity expectations;
        // keep only the first occurrence per (metric, container)
        let mut seen = std::collections::BTreeSet::new();
        let mut kept = Vec::new();
        let mut kept_total = 0.0;
        for (metric, labels, samples) in series {
            let key = (metric.to_string(), labels.clone());
            if seen.insert(key) {
                kept_total += samples.last().unwrap().1;
                kept.push(CounterSeries::new(metric, labels, samples).unwrap());
            }
        }
        let _ = expected_total;

        let window = RunWindow::new(0, 1e9 as i64, 0, 0).unwrap();
        let out = build_usage(
            &kept,
            &MetricMapping::default(),
            &topology,
            &window,
            &BTreeMap::new(),
            NetworkDirection::Both,
        )
        .unwrap();

        let got_total: f64 = out.usage.values().map(|u| u.network_bytes).sum();
        prop_assert!(
            (got_total - kept_total).abs() <= 1e-6 * kept_total.max(1.0),
            "network bytes not conserved: {got_total} vs {kept_total}"
        );

        // unknown containers landed on the system container, not dropped
        let unknown_exists = fixture.iter().enumerate().any(|(i, (name, _, _))| {
            i % 2 == 1 && !topology.contains_container(&ContainerId(name.clone()))
        });
        if unknown_exists {
            prop_assert!(out.usage.contains_key(&ContainerId(SYSTEM_CONTAINER.into())));
        }
    }

    /// Round-tripping generated samples through grouping preserves order
    /// per series and total count.
    #[test]
    fn grouping_preserves_samples(samples in prop::collection::vec(arb_sample(), 0..40)) {
        // deduplicate (name, labels, ts) triples the way a scraper would
        let mut seen = std::collections::BTreeSet::new();
        let mut unique = Vec::new();
        for s in samples {
            if seen.insert((s.name.clone(), s.labels.clone(), s.timestamp_ms)) {
                unique.push(s);
            }
        }
        let n = unique.len();
        let series = group_into_series(unique).unwrap();
        let total: usize = series.iter().map(|s| s.samples.len()).sum();
        prop_assert_eq!(total, n);
        for s in &series {
            for pair in s.samples.windows(2) {
                prop_assert!(pair[0].0 < pair[1].0);
            }
        }
    }
}
