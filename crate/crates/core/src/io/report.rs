//! Report rendering: an aligned table for people, `key=value` lines for tools.
//! Both forms print every metric with the same six-decimal formatting.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::report::EvalReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    KeyValue,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "kv" | "key-value" => Ok(ReportFormat::KeyValue),
            other => Err(format!("unknown report format `{other}` (expected table or kv)")),
        }
    }
}

/// Column headers: every Recall@K, then every NDCG@K.
pub fn metric_columns(ks: &[usize]) -> Vec<String> {
    ks.iter()
        .map(|k| format!("R@{k}"))
        .chain(ks.iter().map(|k| format!("N@{k}")))
        .collect()
}

fn metric_values(report: &EvalReport, metrics: &crate::pipeline::RankingMetrics) -> Result<Vec<String>> {
    if metrics.ks != report.ks {
        return Err(Error::InvalidInput(format!(
            "row evaluated at K={:?} but report declares K={:?}",
            metrics.ks, report.ks
        )));
    }
    Ok(metrics
        .recall
        .iter()
        .chain(&metrics.ndcg)
        .map(|v| format!("{v:.6}"))
        .collect())
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> Result<String> {
    if report.ks.is_empty() {
        return Err(Error::InvalidInput("report has an empty K list".into()));
    }
    let columns = metric_columns(&report.ks);
    let ks: Vec<String> = report.ks.iter().map(usize::to_string).collect();
    let mut out = String::new();
    match format {
        ReportFormat::Table => {
            let _ = writeln!(
                out,
                "# seed {}  epochs {}+{}",
                report.seed, report.epochs_pretrain, report.epochs_finetune
            );
            for table in &report.tables {
                let _ = write!(out, "\n[{}]", table.title);
                if let Some(r) = table.cold_start_ratio {
                    let _ = write!(out, "  cold-start ratio {r}");
                }
                out.push('\n');
                let width = table.rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(8);
                let _ = write!(out, "{:<width$}  {:>6}", "", "users");
                for c in &columns {
                    let _ = write!(out, "  {c:>8}");
                }
                out.push('\n');
                for row in &table.rows {
                    let _ = write!(out, "{:<width$}  {:>6}", row.label, row.metrics.users_evaluated);
                    for v in metric_values(report, &row.metrics)? {
                        let _ = write!(out, "  {v:>8}");
                    }
                    out.push('\n');
                }
            }
        }
        ReportFormat::KeyValue => {
            let _ = writeln!(
                out,
                "meta seed={} epochs_pretrain={} epochs_finetune={} ks={}",
                report.seed,
                report.epochs_pretrain,
                report.epochs_finetune,
                ks.join(",")
            );
            for table in &report.tables {
                for row in &table.rows {
                    let _ = write!(out, "row table={} label={:?}", table.title, row.label);
                    if let Some(r) = table.cold_start_ratio {
                        let _ = write!(out, " cold_start_ratio={r}");
                    }
                    let _ = write!(out, " users={}", row.metrics.users_evaluated);
                    for (c, v) in columns.iter().zip(metric_values(report, &row.metrics)?) {
                        let _ = write!(out, " {c}={v}");
                    }
                    out.push('\n');
                }
            }
        }
    }
    Ok(out)
}

/// Renders `report` and writes it to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &EvalReport, format: ReportFormat, path: Option<&Path>) -> Result<()> {
    let text = render_report(report, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
