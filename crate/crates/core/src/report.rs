//! Model comparison table: accuracy, macro F1, latency and footprint per
//! model, as CSV, JSON or aligned text.
//!
//! `latency_us` is the mean inference-only latency and stays empty unless a
//! profile was supplied; `ram_bytes` is model workspace only.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::eval::EvalReport;

pub const COLUMNS: [&str; 6] = [
    "model",
    "accuracy",
    "f1",
    "latency_us",
    "ram_bytes",
    "flash_bytes",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub accuracy: f64,
    pub f1: f64,
    pub latency_us: Option<f64>,
    pub ram_bytes: u64,
    pub flash_bytes: u64,
}

impl ReportRow {
    pub fn from_eval(model: impl Into<String>, r: &EvalReport) -> Self {
        Self {
            model: model.into(),
            accuracy: r.accuracy,
            f1: r.macro_f1,
            latency_us: r.latency.map(|l| l.mean_us),
            ram_bytes: r.footprint.ram_bytes,
            flash_bytes: r.footprint.flash_bytes,
        }
    }

    fn cells(&self) -> [String; 6] {
        [
            self.model.clone(),
            format!("{:.4}", self.accuracy),
            format!("{:.4}", self.f1),
            self.latency_us
                .map(|l| format!("{l:.3}"))
                .unwrap_or_default(),
            self.ram_bytes.to_string(),
            self.flash_bytes.to_string(),
        ]
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

impl Report {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        Self { rows }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COLUMNS)?;
        for r in &self.rows {
            w.write_record(r.cells())?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| crate::Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.rows)?;
        s.push('\n');
        Ok(s)
    }

    pub fn to_text(&self) -> String {
        let mut table: Vec<[String; 6]> = vec![COLUMNS.map(String::from)];
        table.extend(self.rows.iter().map(ReportRow::cells));
        let widths: Vec<usize> = (0..6)
            .map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in table.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, v)| {
                    if c == 0 {
                        format!("{v:<w$}", w = widths[c])
                    } else {
                        format!("{v:>w$}", w = widths[c])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
                out.push('\n');
            }
        }
        out
    }
}
