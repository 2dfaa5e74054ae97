//! Counter series, run windows and windowed delta extraction.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{IngestError, MetricSample};

/// Ordered samples of one (metric name, label set) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterSeries {
    pub name: String,
    pub labels: BTreeMap<String, String>,
    /// (timestamp_ms, value), timestamps strictly increasing.
    pub samples: Vec<(i64, f64)>,
}

impl CounterSeries {
    pub fn new(
        name: impl Into<String>,
        labels: BTreeMap<String, String>,
        mut samples: Vec<(i64, f64)>,
    ) -> Result<Self, IngestError> {
        samples.sort_by_key(|(t, _)| *t);
        for pair in samples.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(IngestError::DuplicateTimestamp {
                    series: name.into(),
                    timestamp_ms: pair[0].0,
                });
            }
        }
        Ok(CounterSeries {
            name: name.into(),
            labels,
            samples,
        })
    }

    pub fn label(&self, key: &str) -> Option<&str> {
        self.labels.get(key).map(String::as_str)
    }

    /// Samples inside the trimmed window, boundary by nearest-sample-inside.
    pub fn in_window(&self, window: &RunWindow) -> &[(i64, f64)] {
        let (lo, hi) = window.effective();
        let start = self.samples.partition_point(|(t, _)| *t < lo);
        let end = self.samples.partition_point(|(t, _)| *t <= hi);
        &self.samples[start..end]
    }

    /// Last in-window value, for gauges.
    pub fn last_in_window(&self, window: &RunWindow) -> Option<f64> {
        self.in_window(window).last().map(|(_, v)| *v)
    }

    /// Last minus first in-window value, clamped at zero, for usage gauges.
    pub fn gauge_growth(&self, window: &RunWindow) -> Option<f64> {
        let s = self.in_window(window);
        match (s.first(), s.last()) {
            (Some((_, a)), Some((_, b))) => Some((b - a).max(0.0)),
            _ => None,
        }
    }
}

/// Group parsed samples into series keyed by (name, labels).
pub fn group_into_series(samples: Vec<MetricSample>) -> Result<Vec<CounterSeries>, IngestError> {
    let mut grouped: BTreeMap<(String, BTreeMap<String, String>), Vec<(i64, f64)>> =
        BTreeMap::new();
    for s in samples {
        grouped
            .entry((s.name, s.labels))
            .or_default()
            .push((s.timestamp_ms, s.value));
    }
    grouped
        .into_iter()
        .map(|((name, labels), points)| CounterSeries::new(name, labels, points))
        .collect()
}

/// Experiment run window with warmup/cooldown trimming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunWindow {
    pub start_ms: i64,
    pub end_ms: i64,
    #[serde(default)]
    pub warmup_ms: i64,
    #[serde(default)]
    pub cooldown_ms: i64,
}

impl RunWindow {
    pub fn new(start_ms: i64, end_ms: i64, warmup_ms: i64, cooldown_ms: i64) -> Result<Self, IngestError> {
        let w = RunWindow {
            start_ms,
            end_ms,
            warmup_ms,
            cooldown_ms,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.warmup_ms < 0
            || self.cooldown_ms < 0
            || self.end_ms - self.start_ms <= self.warmup_ms + self.cooldown_ms
        {
            return Err(IngestError::InvalidWindow {
                run_ms: self.end_ms - self.start_ms,
                trim_ms: self.warmup_ms + self.cooldown_ms,
            });
        }
        Ok(())
    }

    /// Trimmed interval `[start + warmup, end - cooldown]`.
    pub fn effective(&self) -> (i64, i64) {
        (self.start_ms + self.warmup_ms, self.end_ms - self.cooldown_ms)
    }

    pub fn effective_duration_ms(&self) -> u64 {
        let (lo, hi) = self.effective();
        (hi - lo) as u64
    }
}

/// Windowed counter delta and the number of resets observed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CounterDelta {
    pub delta: f64,
    pub resets: u32,
}

/// Sum of positive inter-sample increments inside the trimmed window.
///
/// A decrease is a counter reset: the post-reset value counts in full as an
/// increment. Boundary samples follow the nearest-sample-inside rule; no
/// interpolation is performed, so the result is invariant under appending
/// samples outside the window.
pub fn counter_delta(series: &CounterSeries, window: &RunWindow) -> Result<CounterDelta, IngestError> {
    window.validate()?;
    let samples = series.in_window(window);
    if samples.len() < 2 {
        return Err(IngestError::InsufficientSamples {
            series: format!("{}{:?}", series.name, series.labels),
            in_window: samples.len(),
        });
    }
    let mut delta = 0.0;
    let mut resets = 0;
    for pair in samples.windows(2) {
        let (_, prev) = pair[0];
        let (_, next) = pair[1];
        if next >= prev {
            delta += next - prev;
        } else {
            resets += 1;
            delta += next;
        }
    }
    Ok(CounterDelta { delta, resets })
}
