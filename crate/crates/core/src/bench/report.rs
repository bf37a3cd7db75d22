use std::fs;
use std::path::Path;

use super::BenchSummary;
use crate::error::{Error, Result};
use crate::fmt::g17;

/// Column label of a budget, as a percentage of the pool (`30%`).
pub fn budget_label(budget: usize, pool_size: usize) -> String {
    format!("{}%", g17(budget as f64 * 100.0 / pool_size as f64))
}

fn opt(v: Option<f64>) -> String {
    v.map(g17).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `summary.json` plus CSV tables into `out_dir`.
///
/// Files: `accuracy.csv` and `speedup.csv` (method by budget),
/// `correlation.csv` (round by method pair), `forgetting.csv` (defined
/// cells only) and `robustness.csv`. Floats use 17 significant digits.
pub fn emit_report(summary: &BenchSummary, out_dir: &Path) -> Result<()> {
    summary.check_finite()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json_path = out_dir.join("summary.json");
    fs::write(&json_path, summary.to_json()? + "\n").map_err(|e| Error::io(&json_path, e))?;

    let labels: Vec<String> = summary
        .budgets
        .iter()
        .map(|&b| budget_label(b, summary.pool_size))
        .collect();

    let header: Vec<String> = std::iter::once("method".to_string()).chain(labels.clone()).collect();
    let rows: Vec<Vec<String>> = summary
        .methods
        .iter()
        .map(|m| {
            std::iter::once(m.method.name())
                .chain(m.cells.iter().map(|c| g17(c.accuracy_mean)))
                .collect()
        })
        .collect();
    write_csv(&out_dir.join("accuracy.csv"), &header, &rows)?;

    let header: Vec<String> = ["method", "basis"]
        .into_iter()
        .map(String::from)
        .chain(labels)
        .collect();
    let mut rows = Vec::new();
    for m in &summary.methods {
        for (basis, pick) in [
            ("wallclock", (|c: &super::BudgetCell| c.speedup_wallclock) as fn(&super::BudgetCell) -> Option<f64>),
            ("gradsteps", |c| c.speedup_gradsteps),
        ] {
            rows.push(
                [m.method.name(), basis.to_string()]
                    .into_iter()
                    .chain(m.cells.iter().map(|c| opt(pick(c))))
                    .collect(),
            );
        }
    }
    write_csv(&out_dir.join("speedup.csv"), &header, &rows)?;

    let baseline = summary.baseline.name();
    let header: Vec<String> = std::iter::once("round".to_string())
        .chain(summary.methods.iter().map(|m| format!("{}~{baseline}", m.method)))
        .collect();
    let rows: Vec<Vec<String>> = (0..summary.budgets.len())
        .map(|j| {
            std::iter::once((j + 1).to_string())
                .chain(
                    summary
                        .methods
                        .iter()
                        .map(|m| opt(m.correlation.get(j).copied().flatten())),
                )
                .collect()
        })
        .collect();
    write_csv(&out_dir.join("correlation.csv"), &header, &rows)?;

    let header: Vec<String> = ["method", "task", "round", "accuracy"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for m in &summary.methods {
        for (i, row) in m.forgetting.cells.iter().enumerate() {
            for (t, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    rows.push(vec![m.method.name(), (i + 1).to_string(), (t + 1).to_string(), g17(*v)]);
                }
            }
        }
    }
    write_csv(&out_dir.join("forgetting.csv"), &header, &rows)?;

    let header: Vec<String> = ["method", "kind", "clean", "s1", "s2", "s3", "s4", "s5"]
        .map(String::from)
        .to_vec();
    let mut rows = Vec::new();
    for m in &summary.methods {
        if let Some(r) = &m.robustness {
            for row in &r.rows {
                rows.push(
                    [m.method.name(), row.kind.name().to_string(), g17(r.clean)]
                        .into_iter()
                        .chain(row.accuracies.iter().map(|&a| g17(a)))
                        .collect(),
                );
            }
            rows.push(
                [m.method.name(), "mean".to_string(), g17(r.clean)]
                    .into_iter()
                    .chain(r.mean.iter().map(|&a| g17(a)))
                    .collect(),
            );
        }
    }
    write_csv(&out_dir.join("robustness.csv"), &header, &rows)?;
    Ok(())
}

/// Writes each sweep point to `out_dir/point-NNN` plus an index file.
pub fn emit_sweep(summaries: &[BenchSummary], out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut index = Vec::with_capacity(summaries.len());
    for (i, s) in summaries.iter().enumerate() {
        let dir = format!("point-{i:03}");
        emit_report(s, &out_dir.join(&dir))?;
        index.push(serde_json::json!({ "dir": dir, "assignment": s.assignment }));
    }
    let path = out_dir.join("sweep.json");
    fs::write(&path, serde_json::to_string_pretty(&index)? + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_summary(path: &Path) -> Result<BenchSummary> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}
