//! Rendering of archived results into human-readable and machine-readable
//! reports, replacing notebook-based analysis.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::experiment::{ExperimentError, LoadedArchive, ScenarioAggregate};
use crate::units::round_half_even_1dp;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("empty archive: nothing to report")]
    EmptyArchive,
    #[error("{0}")]
    Experiment(#[from] ExperimentError),
    #[error("unknown report format {0:?} (expected csv, json or md)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Md,
}

impl std::str::FromStr for ReportFormat {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Md),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

const COMPONENTS: [&str; 4] = ["E_compute", "E_network", "E_storage", "E_total"];

/// One scenario's grouped energy table: a `Primary All` column plus one
/// column per auxiliary service, component rows in watt-hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTable {
    pub scenario: String,
    pub columns: Vec<String>,
    /// (component, per-column mean Wh), row order fixed.
    pub rows: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiRow {
    pub scenario: String,
    pub e_total_wh: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_total_ci95_wh: Option<f64>,
    pub traces: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wh_per_trace: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub underestimation_ratio_auxiliary: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub scenario: String,
    pub service: String,
    pub storage_tb: f64,
    pub network_tb: f64,
}

/// The complete report document; JSON output serializes this as-is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDoc {
    pub experiment: String,
    pub baseline: String,
    pub tables: Vec<ScenarioTable>,
    pub kpis: Vec<KpiRow>,
    pub projections_30d: Vec<ProjectionRow>,
    pub disclosures: Vec<String>,
}

const TB: f64 = 1e12;

fn table_for(agg: &ScenarioAggregate) -> ScenarioTable {
    let mut columns = vec!["Primary All".to_string()];
    let mut aux: Vec<String> = agg
        .entities
        .keys()
        .filter(|k| k.group == "auxiliary" && k.service != "ALL")
        .map(|k| k.service.clone())
        .collect();
    aux.sort();
    columns.extend(aux.iter().cloned());

    let col_values = |component: &str| -> Vec<f64> {
        let pick = |group: &str, service: &str| -> f64 {
            let key = crate::experiment::EntityKey {
                group: group.into(),
                service: service.into(),
            };
            let comps = &agg.entities[&key];
            match component {
                "E_compute" => comps.e_compute.mean,
                "E_network" => comps.e_network.mean,
                "E_storage" => comps.e_storage.mean,
                _ => comps.e_total.mean,
            }
        };
        let mut values = vec![pick("primary", "ALL")];
        values.extend(aux.iter().map(|svc| pick("auxiliary", svc)));
        values
    };

    ScenarioTable {
        scenario: agg.scenario.clone(),
        columns,
        rows: COMPONENTS
            .iter()
            .map(|c| (c.to_string(), col_values(c)))
            .collect(),
    }
}

/// Build the report document from a loaded archive.
pub fn build_report(archive: &LoadedArchive) -> Result<ReportDoc, ReportError> {
    if archive.runs.is_empty() {
        return Err(ReportError::EmptyArchive);
    }
    let aggregates = archive.aggregates();

    let mut tables = Vec::new();
    let mut kpis = Vec::new();
    let mut projections = Vec::new();
    let mut disclosures: Vec<String> = Vec::new();

    for agg in &aggregates {
        tables.push(table_for(agg));
        let total = &agg.entities[&crate::experiment::EntityKey {
            group: "total".into(),
            service: "ALL".into(),
        }];
        kpis.push(KpiRow {
            scenario: agg.scenario.clone(),
            e_total_wh: total.e_total.mean,
            e_total_ci95_wh: total.e_total.ci95_half_width,
            traces: agg.kpis.traces.mean,
            wh_per_trace: agg.kpis.wh_per_trace.as_ref().map(|a| a.mean),
            underestimation_ratio_auxiliary: agg
                .kpis
                .underestimation_ratio_auxiliary
                .as_ref()
                .map(|a| a.mean),
        });
        for (service, proj) in &agg.kpis.projection_30d {
            projections.push(ProjectionRow {
                scenario: agg.scenario.clone(),
                service: service.clone(),
                storage_tb: proj.storage_bytes.mean / TB,
                network_tb: proj.network_bytes.mean / TB,
            });
        }
    }

    for reports in archive.runs.values() {
        for r in reports {
            for d in &r.disclosures {
                if !disclosures.contains(d) {
                    disclosures.push(d.clone());
                }
            }
        }
    }

    Ok(ReportDoc {
        experiment: archive.index.experiment.clone(),
        baseline: archive.index.baseline.clone(),
        tables,
        kpis,
        projections_30d: projections,
        disclosures,
    })
}

/// Wh cell per the published table convention: half-even rounding to one
/// decimal, cells below 0.1 Wh omitted as `-`.
fn wh_cell(value: f64) -> String {
    let rounded = round_half_even_1dp(value);
    if rounded < 0.1 {
        "-".to_string()
    } else {
        format!("{rounded:.1}")
    }
}

pub fn render_md(doc: &ReportDoc) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Energy report: {}", doc.experiment);
    let _ = writeln!(out, "\nBaseline scenario: `{}`.", doc.baseline);

    for table in &doc.tables {
        let _ = writeln!(out, "\n## {}\n", table.scenario);
        let _ = writeln!(out, "| Component (Wh) | {} |", table.columns.join(" | "));
        let _ = writeln!(
            out,
            "|---|{}|",
            table.columns.iter().map(|_| "---:").collect::<Vec<_>>().join("|")
        );
        for (component, values) in &table.rows {
            let cells: Vec<String> = values.iter().map(|v| wh_cell(*v)).collect();
            let _ = writeln!(out, "| {} | {} |", component, cells.join(" | "));
        }
        let _ = writeln!(out, "\nValues < 0.1 Wh shown as `-`.");
    }

    let _ = writeln!(out, "\n## KPIs\n");
    let _ = writeln!(
        out,
        "| Scenario | E_total (Wh) | 95% CI | Traces | Wh/trace | Aux network+storage share |"
    );
    let _ = writeln!(out, "|---|---:|---:|---:|---:|---:|");
    for k in &doc.kpis {
        let _ = writeln!(
            out,
            "| {} | {:.2} | {} | {:.0} | {} | {} |",
            k.scenario,
            k.e_total_wh,
            k.e_total_ci95_wh
                .map(|c| format!("±{c:.2}"))
                .unwrap_or_else(|| "n/a".into()),
            k.traces,
            k.wh_per_trace
                .map(|v| format!("{v:.3e}"))
                .unwrap_or_else(|| "n/a".into()),
            k.underestimation_ratio_auxiliary
                .map(|v| format!("{v:.2}"))
                .unwrap_or_else(|| "n/a".into()),
        );
    }

    let _ = writeln!(out, "\n## 30-day projection\n");
    let _ = writeln!(out, "| Scenario | Service | Stored (TB) | Network (TB) |");
    let _ = writeln!(out, "|---|---|---:|---:|");
    for p in &doc.projections_30d {
        let _ = writeln!(
            out,
            "| {} | {} | {:.2} | {:.2} |",
            p.scenario, p.service, p.storage_tb, p.network_tb
        );
    }

    let _ = writeln!(out, "\n## Notes\n");
    for d in &doc.disclosures {
        let _ = writeln!(out, "- {d}");
    }
    out
}

/// Plot-ready long-format CSV: kind,scenario,entity,metric,value.
pub fn render_csv(doc: &ReportDoc) -> String {
    let mut out = String::from("kind,scenario,entity,metric,value\n");
    for table in &doc.tables {
        for (component, values) in &table.rows {
            for (column, value) in table.columns.iter().zip(values) {
                let _ = writeln!(
                    out,
                    "energy,{},{},{}_wh,{}",
                    table.scenario, column, component, value
                );
            }
        }
    }
    for k in &doc.kpis {
        let _ = writeln!(out, "kpi,{},ALL,e_total_wh,{}", k.scenario, k.e_total_wh);
        let _ = writeln!(out, "kpi,{},ALL,traces,{}", k.scenario, k.traces);
        if let Some(v) = k.wh_per_trace {
            let _ = writeln!(out, "kpi,{},ALL,wh_per_trace,{}", k.scenario, v);
        }
        if let Some(v) = k.underestimation_ratio_auxiliary {
            let _ = writeln!(
                out,
                "kpi,{},ALL,underestimation_ratio_auxiliary,{}",
                k.scenario, v
            );
        }
    }
    for p in &doc.projections_30d {
        let _ = writeln!(
            out,
            "projection_30d,{},{},storage_tb,{}",
            p.scenario, p.service, p.storage_tb
        );
        let _ = writeln!(
            out,
            "projection_30d,{},{},network_tb,{}",
            p.scenario, p.service, p.network_tb
        );
    }
    out
}

pub fn render_json(doc: &ReportDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("report serializes");
    s.push('\n');
    s
}

pub fn render(doc: &ReportDoc, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(doc),
        ReportFormat::Json => render_json(doc),
        ReportFormat::Md => render_md(doc),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wh_cells_follow_table_convention() {
        assert_eq!(wh_cell(0.04), "-");
        assert_eq!(wh_cell(0.06), "0.1");
        assert_eq!(wh_cell(29.306), "29.3");
        assert_eq!(wh_cell(0.0), "-");
        // half-even at the decimal boundary
        assert_eq!(wh_cell(0.25), "0.2");
        assert_eq!(wh_cell(0.35), "0.4");
    }

    #[test]
    fn format_parse() {
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Md);
        assert_eq!("CSV".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert!("pdf".parse::<ReportFormat>().is_err());
    }
}
