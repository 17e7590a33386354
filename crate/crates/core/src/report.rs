//! CSV and JSON emission of result tables.
//!
//! CSV output starts with `# config: key=value` lines, then a header row and
//! one line per row; floats use 17 significant digits and lines end in LF.
//! Extra blocks (fits, notes) go into `# <name>: ...` footer lines. JSON output
//! is one object with `config`, `rows` and any extra blocks as keys.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dependence::{ConditionReport, GammaProfile};
use crate::distance::KappaEstimate;
use crate::error::{Error, Result};
use crate::experiments::{RateTable, RegressionRun};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("key `format`: expected csv or json, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Self::Int(v) => v.to_string(),
            Self::Float(v) => fmt_float(*v),
            Self::Text(s) => csv_escape(s),
            Self::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Self::Int(v) => Value::from(*v),
            Self::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Self::Text(s) => Value::from(s.clone()),
            Self::Bool(b) => Value::from(*b),
        }
    }
}

/// `{:.16e}` gives 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn comment_safe(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub config: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Named blocks written as CSV footers and as JSON keys.
    pub extra: Vec<(String, Value)>,
}

impl Report {
    pub fn new(config: Vec<(String, String)>, columns: &[&str]) -> Self {
        Self {
            config,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn with_extra(mut self, name: &str, value: Value) -> Self {
        self.extra.push((name.to_string(), value));
        self
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(out, "# config: {}={}", k, comment_safe(v));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        for (name, value) in &self.extra {
            match value {
                Value::Object(map) => {
                    let parts: Vec<String> = map.iter().map(|(k, v)| format!("{k}={}", footer_value(v))).collect();
                    let _ = writeln!(out, "# {name}: {}", parts.join(" "));
                }
                Value::Array(items) => {
                    for item in items {
                        let _ = writeln!(out, "# {name}: {}", footer_value(item));
                    }
                }
                other => {
                    let _ = writeln!(out, "# {name}: {}", footer_value(other));
                }
            }
        }
        out
    }

    pub fn rows_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> = self
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.clone(), v.json()))
                        .collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }

    pub fn to_json_value(&self) -> Value {
        let mut top = Map::new();
        let config: Map<String, Value> =
            self.config.iter().map(|(k, v)| (k.clone(), Value::from(v.clone()))).collect();
        top.insert("config".into(), Value::Object(config));
        top.insert("rows".into(), self.rows_json());
        for (name, value) in &self.extra {
            top.insert(name.clone(), value.clone());
        }
        Value::Object(top)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("json values always serialize");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }

    pub fn write(&self, path: &Path, format: Format) -> Result<()> {
        std::fs::write(path, self.render(format))
            .map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))
    }
}

fn footer_value(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(f) if n.is_f64() => fmt_float(f),
            _ => n.to_string(),
        },
        Value::String(s) => comment_safe(s),
        Value::Null => "none".into(),
        other => comment_safe(&other.to_string()),
    }
}

fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn rate_table_report(config: Vec<(String, String)>, table: &RateTable) -> Report {
    let mut r = Report::new(config, &["n", "mean", "se", "floor_flag"]);
    for row in &table.rows {
        r.push_row(vec![
            Cell::Int(row.n as i64),
            Cell::Float(row.mean),
            Cell::Float(row.se),
            Cell::Text(row.flag.as_str().into()),
        ]);
    }
    let mut fit = Map::new();
    match &table.fit.fit {
        Some(f) => {
            fit.insert("slope".into(), num(f.slope));
            fit.insert("intercept".into(), num(f.intercept));
            fit.insert("r2".into(), num(f.r2));
        }
        None => {
            fit.insert("slope".into(), Value::Null);
        }
    }
    fit.insert("degenerate".into(), Value::from(table.fit.degenerate));
    fit.insert(
        "excluded".into(),
        Value::from(
            table
                .fit
                .excluded
                .iter()
                .map(|&i| table.rows[i].n.to_string())
                .collect::<Vec<_>>()
                .join(";"),
        ),
    );
    let mut r = r.with_extra("fit", Value::Object(fit));
    if !table.reference.is_empty() {
        // one footer line per curve
        let lines: Vec<Value> = table
            .reference
            .iter()
            .map(|c| {
                Value::from(format!(
                    "curve={} log_offset={} rms_residual={}",
                    c.name,
                    fmt_float(c.log_offset),
                    fmt_float(c.rms_residual)
                ))
            })
            .collect();
        r.extra.push(("reference".into(), Value::Array(lines)));
    }
    r
}

pub fn gamma_profile_report(config: Vec<(String, String)>, profile: &GammaProfile) -> Report {
    let with_se = profile.se.is_some();
    let mut cols = vec!["lag", "g02", "g12", "g22", "g13", "gamma"];
    if with_se {
        cols.extend(["se_g02", "se_g12", "se_g22", "se_g13"]);
    }
    let mut r = Report::new(config, &cols);
    for (i, &k) in profile.lags.iter().enumerate() {
        let mut row = vec![
            Cell::Int(k as i64),
            Cell::Float(profile.g02[i]),
            Cell::Float(profile.g12[i]),
            Cell::Float(profile.g22[i]),
            Cell::Float(profile.g13[i]),
            Cell::Float(profile.gamma[i]),
        ];
        if let Some(se) = &profile.se {
            row.extend([
                Cell::Float(se.g02[i]),
                Cell::Float(se.g12[i]),
                Cell::Float(se.g22[i]),
                Cell::Float(se.g13[i]),
            ]);
        }
        r.push_row(row);
    }
    let mut meta = Map::new();
    meta.insert("ell_max".into(), Value::from(profile.ell_max));
    let r = r.with_extra("truncation", Value::Object(meta));
    if profile.notes.is_empty() {
        r
    } else {
        r.with_extra("note", Value::from(profile.notes.clone()))
    }
}

pub fn condition_report_extra(report: &ConditionReport) -> Value {
    let mut m = Map::new();
    m.insert("satisfied_estimate".into(), Value::from(report.satisfied_estimate));
    m.insert("tail_slope".into(), report.tail_slope.map_or(Value::Null, num));
    m.insert(
        "partial_sum".into(),
        report.partial_sums.last().copied().map_or(Value::Null, num),
    );
    Value::Object(m)
}

pub fn regression_report(config: Vec<(String, String)>, runs: &[RegressionRun]) -> Report {
    let mut r = Report::new(config, &["n", "noise", "replicates", "kappa", "se", "max_route_gap", "seed"]);
    for run in runs {
        r.push_row(vec![
            Cell::Int(run.n as i64),
            Cell::Text(run.noise.clone()),
            Cell::Int(run.config.replicates as i64),
            Cell::Float(run.kappa.value),
            Cell::Float(run.kappa.se),
            Cell::Float(run.max_route_gap),
            Cell::Int(run.config.master_seed as i64),
        ]);
    }
    r
}

/// One record per estimate: `{method, n, model, value, se, seed}` plus the
/// θ-replicate index and the Monte Carlo sample size (0 for exact methods).
pub fn kappa_records_report(
    config: Vec<(String, String)>,
    model: &str,
    seed: u64,
    estimates: &[(usize, usize, KappaEstimate)],
) -> Report {
    let mut r = Report::new(
        config,
        &["method", "n", "model", "value", "se", "seed", "replicate", "sample_size"],
    );
    for (n, replicate, e) in estimates {
        r.push_row(vec![
            Cell::Text(e.method.as_str().into()),
            Cell::Int(*n as i64),
            Cell::Text(model.into()),
            Cell::Float(e.value),
            Cell::Float(e.se),
            Cell::Int(seed as i64),
            Cell::Int(*replicate as i64),
            Cell::Int(e.sample_size as i64),
        ]);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{RateRow, RowFlag};

    fn table() -> RateTable {
        RateTable::from_rows(vec![
            RateRow { n: 32, mean: 0.1 / 3.0, se: 1e-3, flag: RowFlag::Ok },
            RateRow { n: 64, mean: 0.0123456789012345678, se: 2e-4, flag: RowFlag::Ok },
            RateRow { n: 128, mean: 1e-12, se: 0.0, flag: RowFlag::Zero },
        ])
    }

    #[test]
    fn csv_layout() {
        let r = rate_table_report(vec![("seed".into(), "7".into())], &table());
        let csv = r.to_csv();
        assert!(!csv.contains('\r'));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# config: seed=7");
        assert_eq!(lines[1], "n,mean,se,floor_flag");
        assert_eq!(lines.iter().filter(|l| !l.starts_with('#')).count(), 4);
        assert!(lines.iter().any(|l| l.starts_with("# fit: ")));
        let mean: f64 = lines[2].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mean, 0.1 / 3.0);
        let mantissa = lines[2].split(',').nth(1).unwrap().split('e').next().unwrap();
        assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
    }

    #[test]
    fn empty_rows_give_header_only() {
        let r = Report::new(vec![], &["lag", "gamma"]);
        assert_eq!(r.to_csv(), "lag,gamma\n");
    }

    #[test]
    fn json_round_trip() {
        let r = rate_table_report(vec![("model".into(), "iid".into())], &table());
        let text = r.to_json();
        let parsed: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["rows"], r.rows_json());
        assert_eq!(parsed["config"]["model"], "iid");
        assert_eq!(parsed["rows"][1]["mean"].as_f64().unwrap(), 0.0123456789012345678);
        assert!(parsed["fit"]["slope"].is_number());
    }

    #[test]
    fn text_cells_are_quoted() {
        let mut r = Report::new(vec![], &["a"]);
        r.push_row(vec![Cell::Text("x,\"y\"".into())]);
        assert_eq!(r.to_csv().lines().nth(1).unwrap(), "\"x,\"\"y\"\"\"");
    }
}
