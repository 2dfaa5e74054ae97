//! Thin metric-fetch client for live mode: range queries against a
//! metric-server HTTP API v1 after a recorded run.

use reqwest::blocking::Client;
use std::time::Duration;

use crate::ingest::{parse_range_query_response, CounterSeries, MetricMapping};

use super::{ExperimentError, LiveConfig};

/// Environment variable overriding the configured endpoint.
pub const ENDPOINT_ENV: &str = "METRICS_ENDPOINT";
/// Environment variable holding an optional bearer token.
pub const TOKEN_ENV: &str = "METRICS_TOKEN";

pub struct MetricFetcher {
    endpoint: String,
    token: Option<String>,
    client: Client,
}

impl MetricFetcher {
    pub fn from_config(config: &LiveConfig) -> Result<Self, ExperimentError> {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .ok()
            .or_else(|| config.endpoint.clone())
            .ok_or_else(|| {
                ExperimentError::Fetch(format!(
                    "no metric endpoint: set {ENDPOINT_ENV} or the spec's live.endpoint"
                ))
            })?;
        let client = Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ExperimentError::Fetch(e.to_string()))?;
        Ok(MetricFetcher {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            token: std::env::var(TOKEN_ENV).ok(),
            client,
        })
    }

    /// `GET /api/v1/query_range` URL for one metric over the window.
    pub fn range_url(&self, query: &str, start_ms: i64, end_ms: i64, step_s: f64) -> String {
        format!(
            "{}/api/v1/query_range?query={}&start={}&end={}&step={}",
            self.endpoint,
            urlencode(query),
            start_ms as f64 / 1000.0,
            end_ms as f64 / 1000.0,
            step_s,
        )
    }

    pub fn fetch_range(
        &self,
        query: &str,
        start_ms: i64,
        end_ms: i64,
        step_s: f64,
    ) -> Result<Vec<CounterSeries>, ExperimentError> {
        let url = self.range_url(query, start_ms, end_ms, step_s);
        let mut req = self.client.get(&url);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req
            .send()
            .map_err(|e| ExperimentError::Fetch(format!("{query}: {e}")))?;
        let body = resp
            .text()
            .map_err(|e| ExperimentError::Fetch(format!("{query}: {e}")))?;
        Ok(parse_range_query_response(&body)?)
    }

    /// Fetch every mapped metric over the configured window.
    pub fn fetch_all(
        &self,
        mapping: &MetricMapping,
        live: &LiveConfig,
    ) -> Result<Vec<CounterSeries>, ExperimentError> {
        let mut out = Vec::new();
        for metric in mapping.rules.keys() {
            out.extend(self.fetch_range(metric, live.start_ms, live.end_ms, live.step_s)?);
        }
        Ok(out)
    }
}

fn urlencode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => {
                out.push(b as char)
            }
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fetcher(endpoint: &str) -> MetricFetcher {
        MetricFetcher {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            token: None,
            client: Client::builder()
                .timeout(Duration::from_millis(200))
                .build()
                .unwrap(),
        }
    }

    #[test]
    fn url_construction() {
        let f = fetcher("http://prom:9090/");
        let url = f.range_url("kepler_container_cpu_joules_total{job=\"kepler\"}", 1_000_000, 2_000_000, 60.0);
        assert!(url.starts_with(
            "http://prom:9090/api/v1/query_range?query=kepler_container_cpu_joules_total"
        ));
        assert!(url.contains("%7Bjob%3D%22kepler%22%7D"));
        assert!(url.contains("start=1000"));
        assert!(url.contains("end=2000"));
        assert!(url.contains("step=60"));
    }

    #[test]
    fn unreachable_endpoint_is_a_fetch_error() {
        let f = fetcher("http://127.0.0.1:1");
        let err = f.fetch_range("up", 0, 1000, 60.0).unwrap_err();
        assert!(matches!(err, ExperimentError::Fetch(_)), "{err}");
    }
}
