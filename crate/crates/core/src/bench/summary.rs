use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{compute_speedup, forgetting_matrix, pearson, relative_accuracy, CostBasis, ForgettingMatrix, RobustnessTable};
use crate::error::{Error, Result};
use crate::orchestrator::{Method, RunReport};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Aggregates for one method at one budget. Accuracies are percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetCell {
    pub budget: usize,
    pub fraction: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    /// `None` when the baseline was not run.
    pub relative_accuracy: Option<f64>,
    pub speedup_wallclock: Option<f64>,
    pub speedup_gradsteps: Option<f64>,
    pub grad_steps_mean: f64,
    pub train_ms_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSummary {
    pub method: Method,
    pub cells: Vec<BudgetCell>,
    /// Per round, mean over seeds of the Pearson correlation between this
    /// method's and the baseline's validation entropies.
    pub correlation: Vec<Option<f64>>,
    /// Mean over seeds; `cells[i][t]` is task `i` after round `t`.
    pub forgetting: ForgettingMatrix,
    pub robustness: Option<RobustnessTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSummary {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; excluded from reproducibility checks.
    pub created_unix: u64,
    pub baseline: Method,
    pub seeds: Vec<u64>,
    pub pool_size: usize,
    pub budgets: Vec<usize>,
    /// Sweep parameters of this point, keyed by JSON path.
    pub assignment: BTreeMap<String, serde_json::Value>,
    pub methods: Vec<MethodSummary>,
}

impl BenchSummary {
    pub fn method(&self, m: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|s| s.method == m)
    }

    /// Fails if any emitted number is NaN or infinite.
    pub fn check_finite(&self) -> Result<()> {
        let bad = |what: String| Err(Error::Numeric(what));
        for m in &self.methods {
            for c in &m.cells {
                let opts = [c.relative_accuracy, c.speedup_wallclock, c.speedup_gradsteps];
                let all = [c.fraction, c.accuracy_mean, c.accuracy_std, c.grad_steps_mean, c.train_ms_mean];
                if all.iter().chain(opts.iter().flatten()).any(|v| !v.is_finite()) {
                    return bad(format!("{} at budget {}", m.method, c.budget));
                }
            }
            if m.correlation.iter().flatten().any(|v| !v.is_finite()) {
                return bad(format!("{} correlation", m.method));
            }
            if m.forgetting.cells.iter().flatten().flatten().any(|v| !v.is_finite()) {
                return bad(format!("{} forgetting", m.method));
            }
            if let Some(r) = &m.robustness {
                let vals = std::iter::once(&r.clean)
                    .chain(&r.mean)
                    .chain(r.rows.iter().flat_map(|row| &row.accuracies));
                if vals.into_iter().any(|v| !v.is_finite()) {
                    return bad(format!("{} robustness", m.method));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        self.check_finite()?;
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Relative accuracy of `method` per budget index, averaged over summaries
/// of different datasets. Schedules may differ in sizes but not in length.
pub fn mean_relative_accuracy(summaries: &[BenchSummary], method: Method) -> Result<Vec<f64>> {
    let first = summaries
        .first()
        .ok_or_else(|| Error::contract("no summaries to average"))?;
    let rounds = first.budgets.len();
    let mut sums = vec![0.0; rounds];
    for s in summaries {
        let m = s
            .method(method)
            .ok_or_else(|| Error::contract(format!("{method} missing from a summary")))?;
        if m.cells.len() != rounds {
            return Err(Error::contract("summaries have different round counts"));
        }
        for (sum, c) in sums.iter_mut().zip(&m.cells) {
            *sum += c
                .relative_accuracy
                .ok_or_else(|| Error::contract(format!("{method} has no baseline to compare with")))?;
        }
    }
    Ok(sums.into_iter().map(|v| v / summaries.len() as f64).collect())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation; 0 for a single value.
fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Aggregates run reports over seeds.
///
/// Methods appear in first-seen order. Relative accuracy and speedups
/// compare against `baseline` run with the same seed; they are `None` when
/// the baseline is absent. `robustness` holds per-seed tables per method.
pub fn summarize(
    reports: &[RunReport],
    baseline: Method,
    robustness: &BTreeMap<String, Vec<RobustnessTable>>,
) -> Result<BenchSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::contract("nothing to summarize"))?;
    let budgets = first.budgets();
    let pool_size = first.pool_size;
    let mut order: Vec<Method> = Vec::new();
    let mut by_method: BTreeMap<String, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        if r.budgets() != budgets || r.pool_size != pool_size {
            return Err(Error::contract(format!(
                "{} seed {} ran a different budget schedule",
                r.method, r.seed
            )));
        }
        if !order.contains(&r.method) {
            order.push(r.method);
        }
        by_method.entry(r.method.name()).or_default().push(r);
    }
    let mut seeds: Vec<u64> = by_method[&first.method.name()].iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    let base_runs = by_method.get(&baseline.name());
    let paired = |r: &RunReport| -> Option<&RunReport> {
        base_runs.and_then(|b| b.iter().find(|x| x.seed == r.seed).copied())
    };
    let base_acc: Option<Vec<f64>> = base_runs.map(|runs| {
        (0..budgets.len())
            .map(|j| mean(&runs.iter().map(|r| 100.0 * r.rounds[j].test_accuracy).collect::<Vec<_>>()))
            .collect()
    });

    let mut methods = Vec::with_capacity(order.len());
    for m in order {
        let runs = &by_method[&m.name()];
        let rounds = budgets.len();
        let mut cells = Vec::with_capacity(rounds);
        let speedups = |basis| -> Result<Option<Vec<f64>>> {
            let pairs: Option<Vec<(&RunReport, &RunReport)>> =
                runs.iter().map(|r| paired(r).map(|b| (b, *r))).collect();
            let Some(pairs) = pairs else { return Ok(None) };
            // Ratio of summed costs, checked pairwise for schedule agreement.
            for (b, r) in &pairs {
                compute_speedup(b, r, basis)?;
            }
            Ok(Some(
                (0..rounds)
                    .map(|j| {
                        let cost = |r: &RunReport| match basis {
                            CostBasis::Wallclock => r.rounds[j].cumulative_train_ms,
                            CostBasis::Gradsteps => r.rounds[j].cumulative_grad_steps as f64,
                        };
                        pairs.iter().map(|(b, _)| cost(b)).sum::<f64>()
                            / pairs.iter().map(|(_, r)| cost(r)).sum::<f64>()
                    })
                    .collect(),
            ))
        };
        let wall = speedups(CostBasis::Wallclock)?;
        let steps = speedups(CostBasis::Gradsteps)?;
        for (j, &budget) in budgets.iter().enumerate() {
            let accs: Vec<f64> = runs.iter().map(|r| 100.0 * r.rounds[j].test_accuracy).collect();
            let acc_mean = mean(&accs);
            cells.push(BudgetCell {
                budget,
                fraction: budget as f64 / pool_size as f64,
                accuracy_mean: acc_mean,
                accuracy_std: std_dev(&accs),
                relative_accuracy: base_acc
                    .as_ref()
                    .map(|b| relative_accuracy(acc_mean, b[j]))
                    .transpose()?,
                speedup_wallclock: wall.as_ref().map(|v| v[j]),
                speedup_gradsteps: steps.as_ref().map(|v| v[j]),
                grad_steps_mean: mean(
                    &runs.iter().map(|r| r.rounds[j].cumulative_grad_steps as f64).collect::<Vec<_>>(),
                ),
                train_ms_mean: mean(
                    &runs.iter().map(|r| r.rounds[j].cumulative_train_ms).collect::<Vec<_>>(),
                ),
            });
        }
        let correlation = (0..rounds)
            .map(|j| {
                let rs: Option<Vec<f64>> = runs
                    .iter()
                    .map(|r| {
                        paired(r).and_then(|b| {
                            pearson(&r.rounds[j].val_entropies, &b.rounds[j].val_entropies).ok()
                        })
                    })
                    .collect();
                rs.map(|v| mean(&v))
            })
            .collect();
        let forgetting =
            ForgettingMatrix::mean(&runs.iter().map(|r| forgetting_matrix(r)).collect::<Vec<_>>())?;
        let robustness = match robustness.get(&m.name()) {
            Some(t) if !t.is_empty() => Some(RobustnessTable::mean_of(t)?),
            _ => None,
        };
        methods.push(MethodSummary {
            method: m,
            cells,
            correlation,
            forgetting,
            robustness,
        });
    }
    let summary = BenchSummary {
        schema_version: SUMMARY_SCHEMA_VERSION,
        created_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        baseline,
        seeds,
        pool_size,
        budgets,
        assignment: BTreeMap::new(),
        methods,
    };
    summary.check_finite()?;
    Ok(summary)
}
