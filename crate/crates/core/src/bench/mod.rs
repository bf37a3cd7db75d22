//! Evaluation: accuracy, relative accuracy, speedup, entropy correlation,
//! forgetting matrices, robustness tables, summaries and sweeps.

mod report;
mod runner;
mod summary;

pub use report::{budget_label, emit_report, emit_sweep, read_summary};
pub use runner::{run_bench, set_assignment, sweep, worker_count, BenchRun};
pub use summary::{mean_relative_accuracy, summarize, BenchSummary, BudgetCell, MethodSummary, SUMMARY_SCHEMA_VERSION};

use serde::{Deserialize, Serialize};

use crate::data::{corrupt, Corruption, Dataset};
use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::orchestrator::{accuracy, RunReport};

/// Fraction of `ds` classified correctly; argmax ties go to the smaller class.
pub fn eval_accuracy(model: &ModelParams, ds: &Dataset) -> Result<f64> {
    accuracy(model, ds)
}

pub fn relative_accuracy(acc: f64, baseline_acc: f64) -> Result<f64> {
    if !(baseline_acc > 0.0) {
        return Err(Error::contract(format!(
            "baseline accuracy {baseline_acc} must be positive"
        )));
    }
    Ok(acc / baseline_acc)
}

/// Which training cost a speedup divides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostBasis {
    Wallclock,
    Gradsteps,
}

fn cumulative_costs(report: &RunReport, basis: CostBasis) -> Vec<f64> {
    report
        .rounds
        .iter()
        .map(|r| match basis {
            CostBasis::Wallclock => r.cumulative_train_ms,
            CostBasis::Gradsteps => r.cumulative_grad_steps as f64,
        })
        .collect()
}

/// Baseline cost over method cost, cumulative up to each budget.
pub fn compute_speedup(baseline: &RunReport, method: &RunReport, basis: CostBasis) -> Result<Vec<f64>> {
    if baseline.budgets() != method.budgets() {
        return Err(Error::contract(format!(
            "budget schedules differ: {:?} vs {:?}",
            baseline.budgets(),
            method.budgets()
        )));
    }
    cumulative_costs(baseline, basis)
        .into_iter()
        .zip(cumulative_costs(method, basis))
        .map(|(b, m)| {
            if m > 0.0 {
                Ok(b / m)
            } else {
                Err(Error::contract("method cost is zero"))
            }
        })
        .collect()
}

/// Speedup as printed in tables, e.g. `2.8×`.
pub fn format_speedup(x: f64) -> String {
    format!("{x:.1}×")
}

/// Sample Pearson correlation.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::contract(format!(
            "pearson needs equal lengths of at least 2 (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("an input has zero variance".into()));
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Accuracy on task `i` after round `t`; defined only for `t >= i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgettingMatrix {
    /// `cells[i][t]`, tasks by rounds, both 0-based.
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ForgettingMatrix {
    pub fn get(&self, task: usize, round: usize) -> Option<f64> {
        self.cells.get(task).and_then(|r| r.get(round)).copied().flatten()
    }

    pub fn num_tasks(&self) -> usize {
        self.cells.len()
    }

    /// Accuracy on each task right after it was learned.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.num_tasks()).filter_map(|i| self.get(i, i)).collect()
    }

    /// Mean over tasks `0..T-1` of diagonal minus final-round accuracy.
    pub fn mean_final_drop(&self) -> Option<f64> {
        let t = self.num_tasks();
        if t < 2 {
            return None;
        }
        let sum: f64 = (0..t - 1)
            .map(|i| self.get(i, i).unwrap_or(0.0) - self.get(i, t - 1).unwrap_or(0.0))
            .sum();
        Some(sum / (t - 1) as f64)
    }

    /// Entrywise mean of matrices with identical shape.
    pub fn mean(matrices: &[ForgettingMatrix]) -> Result<ForgettingMatrix> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::contract("mean of no matrices"))?;
        let mut cells = first.cells.clone();
        for m in &matrices[1..] {
            if m.cells.len() != cells.len() {
                return Err(Error::contract("forgetting matrices differ in shape"));
            }
            for (row, other) in cells.iter_mut().zip(&m.cells) {
                for (c, o) in row.iter_mut().zip(other) {
                    *c = c.zip(*o).map(|(a, b)| a + b);
                }
            }
        }
        let n = matrices.len() as f64;
        for c in cells.iter_mut().flatten() {
            *c = c.map(|v| v / n);
        }
        Ok(ForgettingMatrix { cells })
    }
}

pub fn forgetting_matrix(report: &RunReport) -> ForgettingMatrix {
    let t = report.rounds.len();
    let cells = (0..t)
        .map(|i| {
            (0..t)
                .map(|r| report.rounds[r].task_accuracies.get(i).copied().filter(|_| r >= i))
                .collect()
        })
        .collect();
    ForgettingMatrix { cells }
}

pub const SEVERITIES: [u8; 5] = [1, 2, 3, 4, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub kind: Corruption,
    /// Accuracy at severities 1 through 5.
    pub accuracies: Vec<f64>,
}

/// Clean accuracy plus accuracy per corruption and severity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub clean: f64,
    pub rows: Vec<RobustnessRow>,
    /// Mean over kinds at each severity.
    pub mean: Vec<f64>,
}

impl RobustnessTable {
    /// Entrywise mean of tables over the same kinds.
    pub fn mean_of(tables: &[RobustnessTable]) -> Result<RobustnessTable> {
        let first = tables.first().ok_or_else(|| Error::contract("mean of no tables"))?;
        let n = tables.len() as f64;
        let avg = |f: &dyn Fn(&RobustnessTable) -> f64| tables.iter().map(f).sum::<f64>() / n;
        let rows = first
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| RobustnessRow {
                kind: row.kind,
                accuracies: (0..SEVERITIES.len())
                    .map(|s| avg(&|t| t.rows[i].accuracies[s]))
                    .collect(),
            })
            .collect();
        Ok(RobustnessTable {
            clean: avg(&|t| t.clean),
            rows,
            mean: (0..SEVERITIES.len()).map(|s| avg(&|t| t.mean[s])).collect(),
        })
    }
}

/// Evaluates `model` on corrupted copies of `clean_test`.
pub fn robustness_suite(
    model: &ModelParams,
    clean_test: &Dataset,
    kinds: &[Corruption],
    seed: u64,
) -> Result<RobustnessTable> {
    let clean = eval_accuracy(model, clean_test)?;
    let mut rows = Vec::with_capacity(kinds.len());
    for (k, &kind) in kinds.iter().enumerate() {
        let accuracies = SEVERITIES
            .iter()
            .map(|&s| {
                let stream_seed = seed ^ ((k as u64) << 32 | u64::from(s));
                eval_accuracy(model, &corrupt(clean_test, kind, s, stream_seed)?)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(RobustnessRow { kind, accuracies });
    }
    let mean = (0..SEVERITIES.len())
        .map(|s| {
            if rows.is_empty() {
                clean
            } else {
                rows.iter().map(|r| r.accuracies[s]).sum::<f64>() / rows.len() as f64
            }
        })
        .collect();
    Ok(RobustnessTable { clean, rows, mean })
}

#[cfg(test)]
mod tests;
