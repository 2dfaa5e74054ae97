//! Container metric ingestion: exposition-text and range-query parsing,
//! counter semantics, window trimming and usage-vector assembly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod build;
mod exposition;
mod mapping;
mod range_query;
mod series;

pub use build::{build_usage, BuildOutput, Diagnostics, SYSTEM_CONTAINER};
pub use exposition::{parse_exposition, render_exposition};
pub use mapping::{MetricMapping, NetworkDirection, UsageField};
pub use range_query::parse_range_query_response;
pub use series::{counter_delta, group_into_series, CounterDelta, CounterSeries, RunWindow};

/// One sample from a metrics exposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub name: String,
    pub labels: BTreeMap<String, String>,
    pub timestamp_ms: i64,
    pub value: f64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: unknown escape '\\{escape}' in label value")]
    UnknownEscape { line: usize, escape: char },
    #[error("metric server returned {error_type}: {message}")]
    ServerError { error_type: String, message: String },
    #[error("bad range-query response: {0}")]
    BadResponse(String),
    #[error("series {series}: duplicate timestamp {timestamp_ms}")]
    DuplicateTimestamp { series: String, timestamp_ms: i64 },
    #[error("insufficient samples: series {series} has {in_window} samples in the trimmed window, need >= 2")]
    InsufficientSamples { series: String, in_window: usize },
    #[error("run of {run_ms} ms cannot absorb {trim_ms} ms of warmup/cooldown trim")]
    InvalidWindow { run_ms: i64, trim_ms: i64 },
    #[error("invalid metric mapping: {0}")]
    InvalidMapping(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
