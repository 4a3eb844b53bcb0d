//! Seed-aggregated reports over run journals.
//!
//! Rows group by (method, dataset, ρ); each group aggregates the final
//! test metrics over its runs. Markdown output prints percent-scale values
//! with two decimals; JSON keeps full precision.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, Aggregate, EvalResult};
use crate::pipeline::RunRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    MarkdownTable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub dataset: String,
    pub rho: f64,
    pub runs: usize,
    pub balanced_accuracy_mean: f64,
    pub balanced_accuracy_stderr: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_stderr: f64,
}

/// Aggregate journals into deterministic rows ordered by
/// (method, dataset, rho).
pub fn build_rows(records: &[RunRecord]) -> Result<Vec<ReportRow>> {
    let mut groups: BTreeMap<(String, String, String), Vec<&EvalResult>> = BTreeMap::new();
    for record in records {
        let key = (
            record.summary.config.method.to_string(),
            record.summary.dataset.clone(),
            format!("{:.6}", record.summary.rho),
        );
        groups.entry(key).or_default().push(&record.summary.test);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((method, dataset, rho), results) in groups {
        let owned: Vec<EvalResult> = results.into_iter().cloned().collect();
        let agg: Aggregate = aggregate(&owned)?;
        rows.push(ReportRow {
            method,
            dataset,
            rho: rho.parse().expect("formatted above"),
            runs: agg.n,
            balanced_accuracy_mean: agg.balanced_accuracy_mean,
            balanced_accuracy_stderr: agg.balanced_accuracy_stderr,
            macro_f1_mean: agg.macro_f1_mean,
            macro_f1_stderr: agg.macro_f1_stderr,
        });
    }
    Ok(rows)
}

/// Render the report. Markdown mirrors the method-rows layout with
/// `bAcc` and `F1` columns per dataset.
pub fn render(rows: &[ReportRow], format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize"),
        ReportFormat::MarkdownTable => {
            let mut out = String::new();
            out.push_str("| Method | Dataset | rho | Runs | bAcc (%) | F1 (%) |\n");
            out.push_str("|---|---|---|---|---|---|\n");
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {:.2} ± {:.2} | {:.2} ± {:.2} |\n",
                    r.method,
                    r.dataset,
                    r.rho,
                    r.runs,
                    100.0 * r.balanced_accuracy_mean,
                    100.0 * r.balanced_accuracy_stderr,
                    100.0 * r.macro_f1_mean,
                    100.0 * r.macro_f1_stderr,
                ));
            }
            out
        }
    }
}

/// Build and write a report from journal files; errors name the offending
/// file on schema mismatch.
pub fn emit_report(journals: &[std::path::PathBuf], format: ReportFormat, out: &Path) -> Result<Vec<ReportRow>> {
    let mut records = Vec::with_capacity(journals.len());
    for path in journals {
        records.push(crate::pipeline::read_run_record(path)?);
    }
    let rows = build_rows(&records)?;
    std::fs::write(out, render(&rows, format)).map_err(|e| Error::io(out, e))?;
    Ok(rows)
}
