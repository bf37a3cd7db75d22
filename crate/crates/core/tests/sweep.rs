mod common;

use cal_core::bench::sweep;
use cal_core::orchestrator::Method;
use cal_core::replay::Strategy;
use cal_core::Error;
use common::blobs_json;
use serde_json::json;

fn small_base() -> serde_json::Value {
    let mut doc = blobs_json();
    doc["dataset"]["n_per_class"] = json!(200);
    doc["budget"] = json!({"unit": "count", "seed": 100, "increments": [100]});
    doc
}

#[test]
fn singleton_grid_gives_one_point() {
    let grid = vec![("strategy.alpha".to_string(), vec![json!(0.3)])];
    let out = sweep(&small_base(), &grid, &[Method::Cal(Strategy::Sd)], &[0], 1).unwrap();
    assert_eq!(out.len(), 1);
    assert_eq!(out[0].assignment["strategy.alpha"], json!(0.3));
}

#[test]
fn grid_size_is_the_product_of_list_lengths() {
    let grid = vec![
        ("strategy.alpha".to_string(), vec![json!(0.1), json!(0.5), json!(0.9)]),
        ("strategy.m_h".to_string(), vec![json!(8), json!(16)]),
    ];
    let out = sweep(&small_base(), &grid, &[Method::Cal(Strategy::Sd)], &[0], 2).unwrap();
    assert_eq!(out.len(), 6);
    let mut seen: Vec<String> = out.iter().map(|s| serde_json::to_string(&s.assignment).unwrap()).collect();
    seen.sort();
    seen.dedup();
    assert_eq!(seen.len(), 6);
}

#[test]
fn invalid_grid_value_names_its_key() {
    let grid = vec![("strategy.alpha".to_string(), vec![json!(-1.0)])];
    match sweep(&small_base(), &grid, &[Method::Cal(Strategy::Sd)], &[0], 1) {
        Err(Error::Config { path, .. }) => assert!(path.contains("strategy.alpha"), "{path}"),
        other => panic!("expected a config error, got {other:?}"),
    }
}
