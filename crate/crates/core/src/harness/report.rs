use std::str::FromStr;

use super::{BenchmarkResult, BenchmarkTable, MetricSummary};
use crate::error::{Error, Result};
use crate::metrics::CSV_HEADER;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::Config(format!("unknown report format `{other}`"))),
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.4}"))
}

fn row_cells(row: &BenchmarkResult) -> Vec<String> {
    let m = &row.mean;
    vec![
        row.name().to_string(),
        row.kind.label().to_string(),
        cell(m.di),
        cell(m.spd),
        cell(m.aod),
        cell(m.eod),
        cell(m.theil),
        cell(m.balanced_accuracy),
        cell(m.profit),
    ]
}

fn csv_document(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
}

fn markdown(table: &BenchmarkTable) -> String {
    let mut out = format!(
        "Benchmark results ({}; {} folds, seed {})\n\n",
        table.dataset, table.folds, table.seed
    );
    out.push_str("| Fairness processor | Type | DI | SPD | AOD | EOD | TI | BAcc | P |\n");
    out.push_str("|---|---|---|---|---|---|---|---|---|\n");
    for row in &table.rows {
        out.push_str("| ");
        out.push_str(&row_cells(row).join(" | "));
        out.push_str(" |\n");
    }
    let failed: Vec<String> = table
        .rows
        .iter()
        .filter(|r| r.failed_folds() > 0)
        .map(|r| format!("{}: {} of {} folds failed", r.name(), r.failed_folds(), r.folds.len()))
        .collect();
    if !failed.is_empty() {
        out.push('\n');
        for f in failed {
            out.push_str(&format!("- {f}\n"));
        }
    }
    out
}

/// Renders the table; identical tables give identical bytes.
pub fn emit_report(table: &BenchmarkTable, format: ReportFormat) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::Data("cannot report an empty table".into()));
    }
    match format {
        ReportFormat::Csv => csv_document(&CSV_HEADER, table.rows.iter().map(row_cells)),
        ReportFormat::Json => table.to_json(),
        ReportFormat::Markdown => Ok(markdown(table)),
    }
}

type Pick = fn(&MetricSummary) -> Option<f64>;

/// One scatter file per fairness metric: (metric, balanced accuracy) per
/// processor with the fair-interval bounds. Returns `(file name, contents)`.
pub fn emit_plot_data(table: &BenchmarkTable) -> Result<Vec<(String, String)>> {
    if table.rows.is_empty() {
        return Err(Error::Data("cannot plot an empty table".into()));
    }
    let iv = &table.intervals;
    let metrics: [(&str, Pick, (f64, f64)); 5] = [
        ("DI", |m| m.di, iv.ratio),
        ("SPD", |m| m.spd, iv.difference),
        ("AOD", |m| m.aod, iv.difference),
        ("EOD", |m| m.eod, iv.difference),
        ("TI", |m| m.theil, (0.0, iv.theil_max)),
    ];
    metrics
        .iter()
        .map(|(name, pick, (lo, hi))| {
            let header = ["processor", "type", name, "BAcc", "lower", "upper"];
            let rows = table.rows.iter().map(|r| {
                vec![
                    r.name().to_string(),
                    r.kind.label().to_string(),
                    cell(pick(&r.mean)),
                    cell(r.mean.balanced_accuracy),
                    format!("{lo}"),
                    format!("{hi}"),
                ]
            });
            Ok((format!("plot_{}.csv", name.to_ascii_lowercase()), csv_document(&header, rows)?))
        })
        .collect()
}
