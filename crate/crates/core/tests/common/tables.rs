//! Reports whose accuracy and cost cells are chosen by hand.

use cal_core::orchestrator::{Method, RoundRecord, RunReport, REPORT_SCHEMA_VERSION};
use cal_core::replay::Strategy;

pub const POOL: usize = 1000;
pub const BUDGETS: [usize; 5] = [100, 150, 200, 250, 300];

/// Accuracies in percent and cumulative training milliseconds per budget.
pub fn report(method: Method, acc: [f64; 5], cum_ms: [f64; 5]) -> RunReport {
    let rounds = (0..5)
        .map(|j| RoundRecord {
            round: j + 1,
            labeled_size: BUDGETS[j],
            selected: Vec::new(),
            epochs: 1,
            grad_steps: 1,
            cumulative_grad_steps: j as u64 + 1,
            train_ms: cum_ms[j] - if j == 0 { 0.0 } else { cum_ms[j - 1] },
            cumulative_train_ms: cum_ms[j],
            train_accuracy: 1.0,
            val_accuracy: acc[j] / 100.0,
            test_accuracy: acc[j] / 100.0,
            task_accuracies: vec![1.0; j + 1],
            val_entropies: vec![0.1, 0.4, 0.2],
        })
        .collect();
    RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method,
        seed: 0,
        pool_size: POOL,
        config: serde_json::json!({}),
        rounds,
    }
}

pub fn fixtures() -> (RunReport, RunReport) {
    let al = report(
        Method::AlCold,
        [92.6, 93.8, 94.4, 94.9, 94.9],
        [15.0, 28.0, 60.0, 96.0, 140.0],
    );
    let er = report(
        Method::Cal(Strategy::Er),
        [92.6, 93.9, 94.5, 94.9, 94.9],
        [10.0, 20.0, 30.0, 40.0, 50.0],
    );
    (al, er)
}
