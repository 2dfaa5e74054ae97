//! Metric-server HTTP API v1 `query_range` matrix responses.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::series::CounterSeries;
use super::IngestError;

#[derive(Debug, Deserialize)]
struct RangeResponse {
    status: String,
    #[serde(default)]
    data: Option<RangeData>,
    #[serde(default)]
    error: Option<String>,
    #[serde(default, rename = "errorType")]
    error_type: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RangeData {
    #[serde(rename = "resultType")]
    result_type: String,
    result: Vec<RangeSeries>,
}

#[derive(Debug, Deserialize)]
struct RangeSeries {
    metric: BTreeMap<String, String>,
    /// `[[seconds, "value"], ...]`
    values: Vec<(f64, String)>,
}

/// Parse a `query_range` JSON body into counter series.
///
/// Timestamps arrive in (possibly fractional) seconds and are converted to
/// milliseconds; values are string-encoded reals.
pub fn parse_range_query_response(json: &str) -> Result<Vec<CounterSeries>, IngestError> {
    let resp: RangeResponse = serde_json::from_str(json)
        .map_err(|e| IngestError::BadResponse(format!("invalid JSON: {e}")))?;
    if resp.status != "success" {
        return Err(IngestError::ServerError {
            error_type: resp.error_type.unwrap_or_default(),
            message: resp.error.unwrap_or_else(|| "unknown server error".into()),
        });
    }
    let data = resp
        .data
        .ok_or_else(|| IngestError::BadResponse("success response without data".into()))?;
    if data.result_type != "matrix" {
        return Err(IngestError::BadResponse(format!(
            "expected matrix resultType, got {:?}",
            data.result_type
        )));
    }
    data.result
        .into_iter()
        .map(|entry| {
            let mut labels = entry.metric;
            let name = labels.remove("__name__").unwrap_or_default();
            let samples = entry
                .values
                .into_iter()
                .map(|(secs, v)| {
                    let value: f64 = v.parse().map_err(|_| IngestError::BadResponse(format!(
                        "unparsable sample value {v:?}"
                    )))?;
                    Ok(((secs * 1000.0).round() as i64, value))
                })
                .collect::<Result<Vec<_>, IngestError>>()?;
            CounterSeries::new(name, labels, samples)
        })
        .collect()
}
