#![allow(dead_code)]

pub mod instances;
pub mod tables;

use cal_core::config::RunConfig;
use cal_core::orchestrator::Experiment;
use serde_json::{json, Value};

/// Eight well separated 2-d blobs; pool of 4000, budgets 10/20/30%.
pub fn blobs_json() -> Value {
    json!({
        "dataset": {"kind": "blobs", "k": 8, "n_per_class": 750, "d": 2, "spread": 0.15, "seed": 7},
        "budget": {"unit": "count", "seed": 400, "increments": [400, 400]},
        "acquisition": {"policy": "entropy"},
        "strategy": {"sigma": 1.0},
        "seeds": [0, 1, 2]
    })
}

/// Five tasks of 4 classes in 4-d whose means move by 1.5 per task.
pub fn drift_json() -> Value {
    json!({
        "dataset": {"kind": "drift", "k": 4, "n_per_task": 600, "d": 4, "n_tasks": 5,
                    "drift": 1.5, "spread": 0.15, "seed": 11},
        "budget": {"unit": "count", "seed": 200, "increments": [200, 200, 200, 200]},
        "seeds": [0, 1, 2]
    })
}

pub fn config(doc: &Value) -> RunConfig {
    RunConfig::from_json_str(&doc.to_string()).expect("fixture config parses")
}

pub fn blobs() -> RunConfig {
    config(&blobs_json())
}

pub fn drift() -> RunConfig {
    config(&drift_json())
}

pub fn experiment(cfg: &RunConfig) -> Experiment {
    cfg.build_experiment().expect("fixture experiment builds")
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
