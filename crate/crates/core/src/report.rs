//! Rectangular experiment reports and their CSV/JSON forms.

use std::cmp::Ordering;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde_json::{json, Value};

use crate::config::{Mode, WindowKind};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "experiment,mode,window_kind,alpha_w,snr_db,trial,metric,value";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: String,
    pub mode: Mode,
    pub window_kind: WindowKind,
    pub alpha_w: f64,
    pub snr_db: Option<f64>,
    /// Trial index, or a summary label such as `median`.
    pub trial: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportMetadata {
    pub fingerprint: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub metadata: ReportMetadata,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Parse(format!("unknown format '{other}'"))),
        }
    }
}

pub fn version_string() -> String {
    format!("v{}", env!("CARGO_PKG_VERSION"))
}

fn trial_key(t: &str) -> (u8, u64, &str) {
    match t.parse::<u64>() {
        Ok(n) => (0, n, ""),
        Err(_) => (1, 0, t),
    }
}

fn cmp_rows(a: &ReportRow, b: &ReportRow) -> Ordering {
    a.experiment
        .cmp(&b.experiment)
        .then(a.mode.cmp(&b.mode))
        .then(a.window_kind.as_str().cmp(b.window_kind.as_str()))
        .then(a.alpha_w.total_cmp(&b.alpha_w))
        .then(a.snr_db.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.snr_db.unwrap_or(f64::NEG_INFINITY)))
        .then(a.metric.cmp(&b.metric))
        .then(trial_key(&a.trial).cmp(&trial_key(&b.trial)))
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|e| Error::Parse(format!("bad number '{s}': {e}")))
}

impl ExperimentReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        Self {
            rows: Vec::new(),
            metadata,
        }
    }

    /// Puts rows in a canonical order, independent of how they were produced.
    pub fn sort(&mut self) {
        self.rows.sort_by(cmp_rows);
    }

    pub fn extend(&mut self, other: ExperimentReport) {
        self.rows.extend(other.rows);
    }

    /// Rows matching a mode, alpha and metric, in order.
    pub fn select<'a>(&'a self, mode: Mode, metric: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.mode == mode && r.metric == metric)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.experiment,
                r.mode,
                r.window_kind,
                fmt_f64(r.alpha_w),
                r.snr_db.map(fmt_f64).unwrap_or_default(),
                r.trial,
                r.metric,
                fmt_f64(r.value)
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let num = |v: f64| -> Value {
            if v.is_finite() {
                json!(v)
            } else {
                json!(fmt_f64(v))
            }
        };
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "experiment": r.experiment,
                    "mode": r.mode.as_str(),
                    "window_kind": r.window_kind.as_str(),
                    "alpha_w": num(r.alpha_w),
                    "snr_db": r.snr_db.map(num).unwrap_or(Value::Null),
                    "trial": r.trial,
                    "metric": r.metric,
                    "value": num(r.value),
                })
            })
            .collect();
        let doc = json!({
            "metadata": {
                "fingerprint": self.metadata.fingerprint,
                "seed": self.metadata.seed,
                "version": self.metadata.version,
            },
            "rows": rows,
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes the report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &ExperimentReport, format: Format, path: Option<&Path>) -> Result<()> {
    let text = report.render(format);
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn parse_csv_rows(text: &str) -> Result<Vec<ReportRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Parse(format!("unexpected header {other:?}"))),
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(Error::Parse(format!("expected 8 fields in '{l}'")));
            }
            Ok(ReportRow {
                experiment: f[0].to_string(),
                mode: f[1].parse()?,
                window_kind: f[2].parse()?,
                alpha_w: parse_f64(f[3])?,
                snr_db: if f[4].is_empty() { None } else { Some(parse_f64(f[4])?) },
                trial: f[5].to_string(),
                metric: f[6].to_string(),
                value: parse_f64(f[7])?,
            })
        })
        .collect()
}

pub fn parse_json_rows(text: &str) -> Result<Vec<ReportRow>> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let num = |v: &Value| -> Result<f64> {
        match v {
            Value::Number(n) => n.as_f64().ok_or_else(|| Error::Parse("bad number".into())),
            Value::String(s) => parse_f64(s),
            _ => Err(Error::Parse(format!("expected number, got {v}"))),
        }
    };
    let s = |v: &Value| -> Result<String> {
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Parse(format!("expected string, got {v}")))
    };
    doc["rows"]
        .as_array()
        .ok_or_else(|| Error::Parse("missing rows".into()))?
        .iter()
        .map(|r| {
            Ok(ReportRow {
                experiment: s(&r["experiment"])?,
                mode: s(&r["mode"])?.parse()?,
                window_kind: s(&r["window_kind"])?.parse()?,
                alpha_w: num(&r["alpha_w"])?,
                snr_db: if r["snr_db"].is_null() { None } else { Some(num(&r["snr_db"])?) },
                trial: s(&r["trial"])?,
                metric: s(&r["metric"])?,
                value: num(&r["value"])?,
            })
        })
        .collect()
}

/// Median of the finite-or-infinite values; NaN-free input expected.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        let (a, b) = (v[n / 2 - 1], v[n / 2]);
        if a.is_infinite() || b.is_infinite() {
            if a == b { a } else { b }
        } else {
            0.5 * (a + b)
        }
    }
}
