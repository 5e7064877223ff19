use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::metrics::{kendall_tau, MetricId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSem {
    pub mean: f64,
    pub sem: f64,
}

/// One recommender's fold-aggregated results.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub recommender: String,
    pub hr5: MeanSem,
    pub hr10: MeanSem,
    /// `None` when the metric was undefined in some fold.
    pub bias: Vec<(MetricId, Option<MeanSem>)>,
    pub unmatched: MeanSem,
}

impl EvalRow {
    pub fn metric(&self, m: MetricId) -> Option<MeanSem> {
        self.bias.iter().find(|b| b.0 == m).and_then(|b| b.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn num(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".into()
    } else {
        s
    }
}

fn metric_columns(rows: &[EvalRow]) -> Result<Vec<MetricId>, EvalError> {
    let cols: Vec<MetricId> = rows.first().map(|r| r.bias.iter().map(|b| b.0).collect()).unwrap_or_default();
    if rows.iter().any(|r| r.bias.iter().map(|b| b.0).ne(cols.iter().copied())) {
        return Err(EvalError::MetricMismatch);
    }
    Ok(cols)
}

/// Renders rows as CSV (`recommender,hr5,hr5_sem,hr10,hr10_sem,<metric>,<metric>_sem,...,
/// unmatched,unmatched_sem`) or as a markdown table, optionally followed by the correlation
/// matrix. Numbers carry 4 decimals.
pub fn emit_report(
    rows: &[EvalRow],
    matrix: Option<&CorrelationMatrix>,
    format: ReportFormat,
) -> Result<String, EvalError> {
    let cols = metric_columns(rows)?;
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let mut header =
                vec!["recommender".to_owned(), "hr5".into(), "hr5_sem".into(), "hr10".into(), "hr10_sem".into()];
            for m in &cols {
                header.push(m.as_str().into());
                header.push(format!("{m}_sem"));
            }
            header.push("unmatched".into());
            header.push("unmatched_sem".into());
            w.write_record(&header).map_err(|e| EvalError::Report(e.to_string()))?;
            for r in rows {
                let mut rec =
                    vec![r.recommender.clone(), num(r.hr5.mean), num(r.hr5.sem), num(r.hr10.mean), num(r.hr10.sem)];
                for (_, v) in &r.bias {
                    match v {
                        Some(v) => rec.extend([num(v.mean), num(v.sem)]),
                        None => rec.extend([String::new(), String::new()]),
                    }
                }
                rec.extend([num(r.unmatched.mean), num(r.unmatched.sem)]);
                w.write_record(&rec).map_err(|e| EvalError::Report(e.to_string()))?;
            }
            let bytes = w.into_inner().map_err(|e| EvalError::Report(e.to_string()))?;
            out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
            if let Some(m) = matrix {
                out.push('\n');
                out.push_str(&m.to_csv());
            }
        }
        ReportFormat::Markdown => {
            let pm = |v: MeanSem| format!("{} ± {}", num(v.mean), num(v.sem));
            out.push_str("| recommender | HR@5 | HR@10 |");
            for m in &cols {
                let _ = write!(out, " {m} |");
            }
            out.push_str(" unmatched |\n|---|---|---|");
            for _ in &cols {
                out.push_str("---|");
            }
            out.push_str("---|\n");
            for r in rows {
                let _ = write!(out, "| {} | {} | {} |", r.recommender, pm(r.hr5), pm(r.hr10));
                for (_, v) in &r.bias {
                    let _ = write!(out, " {} |", v.map(pm).unwrap_or_else(|| "n/a".into()));
                }
                let _ = writeln!(out, " {} |", pm(r.unmatched));
            }
            if let Some(m) = matrix {
                out.push('\n');
                out.push_str(&m.to_markdown());
            }
        }
    }
    Ok(out)
}

fn parse_num(s: &str) -> Result<Option<f64>, EvalError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| EvalError::Report(format!("not a number: {s:?}")))
}

/// Reads back the CSV rows written by [`emit_report`]. Anything after the first blank line
/// (the correlation matrix) is ignored.
pub fn parse_report_csv(text: &str) -> Result<Vec<EvalRow>, EvalError> {
    let table = text.split("\n\n").next().unwrap_or("");
    let mut rdr = csv::Reader::from_reader(table.as_bytes());
    let header: Vec<String> =
        rdr.headers().map_err(|e| EvalError::Report(e.to_string()))?.iter().map(str::to_owned).collect();
    let n = header.len();
    if n < 7
        || header[..5] != ["recommender", "hr5", "hr5_sem", "hr10", "hr10_sem"]
        || header[n - 2..] != ["unmatched", "unmatched_sem"]
        || !(n - 7).is_multiple_of(2)
    {
        return Err(EvalError::Report(format!("unexpected header {header:?}")));
    }
    let mut cols = Vec::new();
    for pair in header[5..n - 2].chunks(2) {
        let m: MetricId =
            pair[0].parse().map_err(|_| EvalError::Report(format!("unknown metric column {}", pair[0])))?;
        if pair[1] != format!("{m}_sem") {
            return Err(EvalError::Report(format!("expected {m}_sem, got {}", pair[1])));
        }
        cols.push(m);
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| EvalError::Report(e.to_string()))?;
        let f = |i: usize| parse_num(&rec[i]);
        let req = |i: usize| f(i)?.ok_or_else(|| EvalError::Report(format!("missing value in column {}", header[i])));
        let ms = |i: usize| -> Result<MeanSem, EvalError> { Ok(MeanSem { mean: req(i)?, sem: req(i + 1)? }) };
        let mut bias = Vec::new();
        for (j, m) in cols.iter().enumerate() {
            let i = 5 + 2 * j;
            let v = match (f(i)?, f(i + 1)?) {
                (Some(mean), Some(sem)) => Some(MeanSem { mean, sem }),
                _ => None,
            };
            bias.push((*m, v));
        }
        rows.push(EvalRow { recommender: rec[0].to_owned(), hr5: ms(1)?, hr10: ms(3)?, bias, unmatched: ms(n - 2)? });
    }
    Ok(rows)
}

/// Pairwise Kendall tau-b between metric columns; `None` where a column is constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub metrics: Vec<MetricId>,
    pub tau: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: MetricId, b: MetricId) -> Option<f64> {
        let i = self.metrics.iter().position(|m| *m == a)?;
        let j = self.metrics.iter().position(|m| *m == b)?;
        self.tau[i][j]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric");
        for m in &self.metrics {
            let _ = write!(out, ",{m}");
        }
        out.push('\n');
        for (m, row) in self.metrics.iter().zip(&self.tau) {
            out.push_str(m.as_str());
            for v in row {
                let _ = write!(out, ",{}", v.map(num).unwrap_or_default());
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| Kendall τ |");
        for m in &self.metrics {
            let _ = write!(out, " {m} |");
        }
        out.push_str("\n|---|");
        for _ in &self.metrics {
            out.push_str("---|");
        }
        out.push('\n');
        for (m, row) in self.metrics.iter().zip(&self.tau) {
            let _ = write!(out, "| {m} |");
            for v in row {
                let _ = write!(out, " {} |", v.map(num).unwrap_or_else(|| "n/a".into()));
            }
            out.push('\n');
        }
        out
    }
}

pub const MIN_CORRELATION_ROWS: usize = 4;

/// Kendall tau between the per-recommender bias means of each pair of metrics.
pub fn correlate_metrics(rows: &[EvalRow], metrics: &[MetricId]) -> Result<CorrelationMatrix, EvalError> {
    if rows.len() < MIN_CORRELATION_ROWS {
        return Err(EvalError::TooFewRows { need: MIN_CORRELATION_ROWS, have: rows.len() });
    }
    let mut columns = Vec::with_capacity(metrics.len());
    for &m in metrics {
        let col: Result<Vec<f64>, EvalError> = rows
            .iter()
            .map(|r| {
                r.metric(m)
                    .map(|v| v.mean)
                    .ok_or_else(|| EvalError::MissingValue { recommender: r.recommender.clone(), metric: m })
            })
            .collect();
        columns.push(col?);
    }
    let tau = columns.iter().map(|a| columns.iter().map(|b| kendall_tau(a, b).ok()).collect()).collect();
    Ok(CorrelationMatrix { metrics: metrics.to_vec(), tau })
}
