//! `report`: merges `eval.json` files into one comparison table.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use gesture_core::eval::EvalReport;
use gesture_core::report::{Report, ReportRow};
use serde::Serialize;

use crate::manifest::Run;
use crate::Summary;

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ReportArgs {
    /// `eval.json` files, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub eval: Vec<PathBuf>,
    /// Row names, one per file; defaults to each file's directory name.
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn report(a: ReportArgs) -> Result<Summary> {
    let mut run = Run::new("report", &a.out, a.force, &a)?;
    if !a.names.is_empty() && a.names.len() != a.eval.len() {
        bail!("--names needs one entry per --eval file");
    }
    let mut rows = Vec::new();
    for (i, path) in a.eval.iter().enumerate() {
        run.input(path)?;
        let r: EvalReport = serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let name = match a.names.get(i) {
            Some(n) => n.clone(),
            None => path
                .parent()
                .and_then(|p| p.file_name())
                .map_or_else(|| format!("model{i}"), |n| n.to_string_lossy().into_owned()),
        };
        rows.push(ReportRow::from_eval(name, &r));
    }
    let report = Report::new(rows);
    run.write("report.csv", report.to_csv()?)?;
    run.write("report.json", report.to_json()?)?;
    run.write("report.txt", report.to_text())?;
    Ok(Summary {
        command: "report",
        lines: report.to_text().lines().map(String::from).collect(),
        data: serde_json::to_value(&report.rows)?,
        out: run.finish()?.display().to_string(),
    })
}
