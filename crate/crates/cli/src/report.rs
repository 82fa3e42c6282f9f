//! Report output: one JSON document per run plus an optional CSV of
//! iteration histories.
//!
//! Reports carry no timestamps or other ambient state, so identical
//! invocations produce byte-identical files. CSV numbers are rendered with a
//! fixed significant-digit count (default 17, the full-f64 width) that can
//! be lowered with `SKRYLOV_REPORT_DIGITS`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use skrylov::{IterationRow, RunReport};

use crate::matrix_market::format_value;
use crate::CliError;

pub const REPORT_DIGITS_ENV: &str = "SKRYLOV_REPORT_DIGITS";

/// Full JSON payload: the command, the effective configuration, and the
/// structured run report (instance, checks, iterations, methods, summary).
#[derive(Serialize)]
pub struct ReportFile {
    pub command: String,
    pub config: BTreeMap<String, serde_json::Value>,
    #[serde(flatten)]
    pub report: RunReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution: Option<Vec<f64>>,
}

pub fn report_digits() -> usize {
    std::env::var(REPORT_DIGITS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .map(|d| d.clamp(1, 17))
        .unwrap_or(17)
}

/// `method,q,res_norm,err_norm,alpha,beta` — one line per recorded
/// iteration; res_norm is the recomputed true residual. Missing values
/// (no oracle, no beta on the final step) render as empty fields.
pub fn history_csv(rows: &[IterationRow], digits: usize) -> String {
    let mut out = String::from("method,q,res_norm,err_norm,alpha,beta\n");
    let fmt_opt = |v: Option<f64>| v.map(|x| format_value(x, digits)).unwrap_or_default();
    for row in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.method,
            row.q,
            format_value(row.res_norm, digits),
            fmt_opt(row.err_norm),
            fmt_opt(row.alpha),
            fmt_opt(row.beta),
        )
        .unwrap();
    }
    out
}

fn output_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

pub fn write_report(report: &ReportFile, path: &Path) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report)
        .map_err(|e| CliError::Output(format!("cannot serialize report: {e}")))?;
    json.push('\n');
    std::fs::write(path, json).map_err(|e| output_error(path, e))
}

pub fn write_csv(rows: &[IterationRow], path: &Path) -> Result<(), CliError> {
    std::fs::write(path, history_csv(rows, report_digits())).map_err(|e| output_error(path, e))
}
