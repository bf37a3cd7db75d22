use super::*;
use crate::data::Example;
use crate::orchestrator::{Method, RoundRecord, REPORT_SCHEMA_VERSION};
use crate::replay::Strategy;
use crate::rng::seeded;
use proptest::prelude::*;
use std::collections::BTreeMap;

fn synthetic_report(method: Method, seed: u64, steps: &[u64], ms: &[f64], acc: &[f64]) -> RunReport {
    let mut cum_steps = 0;
    let mut cum_ms = 0.0;
    let rounds = steps
        .iter()
        .zip(ms)
        .zip(acc)
        .enumerate()
        .map(|(t, ((&s, &m), &a))| {
            cum_steps += s;
            cum_ms += m;
            RoundRecord {
                round: t + 1,
                labeled_size: 100 * (t + 1),
                selected: vec![],
                epochs: 1,
                grad_steps: s,
                cumulative_grad_steps: cum_steps,
                train_ms: m,
                cumulative_train_ms: cum_ms,
                train_accuracy: a,
                val_accuracy: a,
                test_accuracy: a,
                task_accuracies: (0..=t).map(|i| a - 0.01 * (t - i) as f64).collect(),
                val_entropies: vec![0.1 * (seed + 1) as f64, 0.5, 0.2 + 0.1 * t as f64],
            }
        })
        .collect();
    RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        method,
        seed,
        pool_size: 1000,
        config: serde_json::json!({}),
        rounds,
    }
}

fn tiny(examples: &[(f64, usize)], k: usize) -> Dataset {
    Dataset::new(
        "t",
        examples.iter().map(|&(x, y)| Example::new(vec![x], y)).collect(),
        1,
        k,
    )
    .unwrap()
}

#[test]
fn zero_model_predicts_class_zero() {
    let ds = tiny(&[(1.0, 0), (2.0, 1), (3.0, 2), (4.0, 0), (5.0, 1), (6.0, 2)], 3);
    let m = ModelParams::zeros(&[1, 3]).unwrap();
    assert_eq!(eval_accuracy(&m, &ds).unwrap(), 1.0 / 3.0);
}

#[test]
fn accuracy_matches_hand_count() {
    // Logit of class 1 is x, class 0 is 0: predicts 1 iff x > 0.
    let mut m = ModelParams::zeros(&[1, 2]).unwrap();
    m.layers_mut()[0].weights = vec![0.0, 1.0];
    let rows = [
        (-2.0, 0),
        (-1.0, 0),
        (-0.5, 1),
        (0.0, 0),
        (0.0, 1),
        (0.5, 1),
        (1.0, 1),
        (2.0, 0),
        (3.0, 1),
        (-3.0, 0),
    ];
    // Correct: rows 0, 1, 3, 5, 6, 8, 9.
    assert_eq!(eval_accuracy(&m, &tiny(&rows, 2)).unwrap(), 0.7);
    let perfect: Vec<(f64, usize)> = rows.iter().map(|&(x, _)| (x, usize::from(x > 0.0))).collect();
    assert_eq!(eval_accuracy(&m, &tiny(&perfect, 2)).unwrap(), 1.0);
}

#[test]
fn relative_accuracy_cases() {
    assert_eq!(relative_accuracy(0.8, 0.8).unwrap(), 1.0);
    assert_eq!(relative_accuracy(0.5, 1.0).unwrap(), 0.5);
    assert!(matches!(relative_accuracy(0.5, 0.0), Err(Error::Contract(_))));
}

#[test]
fn speedup_of_identical_reports_is_one() {
    let r = synthetic_report(Method::AlCold, 0, &[10, 20], &[3.0, 4.0], &[0.5, 0.6]);
    for basis in [CostBasis::Wallclock, CostBasis::Gradsteps] {
        assert_eq!(compute_speedup(&r, &r, basis).unwrap(), vec![1.0, 1.0]);
    }
}

#[test]
fn gradstep_speedup_is_ratio_of_counters() {
    let b = synthetic_report(Method::AlCold, 0, &[10, 30, 60], &[1.0; 3], &[0.5; 3]);
    let m = synthetic_report(Method::Cal(Strategy::Er), 0, &[10, 10, 20], &[1.0; 3], &[0.5; 3]);
    assert_eq!(
        compute_speedup(&b, &m, CostBasis::Gradsteps).unwrap(),
        vec![1.0, 40.0 / 20.0, 100.0 / 40.0]
    );
}

#[test]
fn speedup_rejects_mismatched_schedules() {
    let b = synthetic_report(Method::AlCold, 0, &[10, 30], &[1.0; 2], &[0.5; 2]);
    let m = synthetic_report(Method::AlWarm, 0, &[10, 30, 5], &[1.0; 3], &[0.5; 3]);
    assert!(matches!(compute_speedup(&b, &m, CostBasis::Gradsteps), Err(Error::Contract(_))));
}

#[test]
fn speedup_formatting() {
    assert_eq!(format_speedup(1.0), "1.0×");
    assert_eq!(format_speedup(2.8), "2.8×");
}

#[test]
fn pearson_cases() {
    let a = [1.0, 2.0, 3.0, 5.0];
    let neg: Vec<f64> = a.iter().map(|x| -x).collect();
    assert!((pearson(&a, &a).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&a, &neg).unwrap() + 1.0).abs() < 1e-15);
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!(matches!(pearson(&a, &[1.0; 4]), Err(Error::UndefinedCorrelation(_))));
    assert!(matches!(pearson(&[1.0], &[1.0]), Err(Error::Contract(_))));
}

proptest! {
    #[test]
    fn pearson_is_symmetric_and_affine_invariant(
        a in prop::collection::vec(-10.0f64..10.0, 3..20),
        seed in 0u64..1000,
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x * 0.3 + ((i as u64 * 7 + seed) % 11) as f64).collect();
        let Ok(r) = pearson(&a, &b) else { return Ok(()) };
        prop_assert!((-1.0..=1.0).contains(&r));
        prop_assert!((pearson(&b, &a).unwrap() - r).abs() < 1e-12);
        let a2: Vec<f64> = a.iter().map(|x| scale * x + shift).collect();
        prop_assert!((pearson(&a2, &b).unwrap() - r).abs() < 1e-9);
    }
}

#[test]
fn forgetting_matrix_is_lower_triangular_in_time() {
    let r = synthetic_report(Method::NaiveFinetune, 0, &[1, 1, 1], &[1.0; 3], &[0.9, 0.8, 0.7]);
    let f = forgetting_matrix(&r);
    assert_eq!(f.num_tasks(), 3);
    for i in 0..3 {
        for t in 0..3 {
            assert_eq!(f.get(i, t).is_some(), t >= i, "({i},{t})");
        }
    }
    assert_eq!(f.diagonal(), vec![0.9, 0.8, 0.7]);
    assert_eq!(f.get(0, 2), Some(0.7 - 0.02));
}

#[test]
fn robustness_table_shape_and_clean_column() {
    let ds = crate::data::gen_blobs(3, 30, 2, 0.2, 1).unwrap();
    let m = ModelParams::init(&[2, 8, 3], &mut seeded(2)).unwrap();
    let t = robustness_suite(&m, &ds, &Corruption::ALL, 7).unwrap();
    assert_eq!(t.clean, eval_accuracy(&m, &ds).unwrap());
    assert_eq!(t.rows.len(), Corruption::ALL.len());
    assert!(t.rows.iter().all(|r| r.accuracies.len() == 5));
    assert_eq!(t.mean.len(), 5);
    let again = robustness_suite(&m, &ds, &Corruption::ALL, 7).unwrap();
    assert_eq!(t, again);
}

fn bench_reports() -> Vec<RunReport> {
    let mut v = Vec::new();
    for seed in 0..3 {
        v.push(synthetic_report(Method::AlCold, seed, &[10, 30, 60], &[5.0, 9.0, 14.0], &[0.6, 0.7, 0.8]));
        v.push(synthetic_report(
            Method::Cal(Strategy::Er),
            seed,
            &[10, 12, 12],
            &[5.0, 3.0, 3.0],
            &[0.6, 0.69 + 0.01 * seed as f64, 0.79],
        ));
    }
    v
}

#[test]
fn baseline_relative_accuracy_is_one_everywhere() {
    let s = summarize(&bench_reports(), Method::AlCold, &BTreeMap::new()).unwrap();
    let base = s.method(Method::AlCold).unwrap();
    for c in &base.cells {
        assert_eq!(c.relative_accuracy, Some(1.0));
        assert_eq!(c.speedup_gradsteps, Some(1.0));
    }
    let er = s.method(Method::Cal(Strategy::Er)).unwrap();
    assert_eq!(er.cells[2].speedup_gradsteps, Some(300.0 / 102.0));
    assert!((er.cells[1].accuracy_mean - 70.0).abs() < 1e-9);
    assert!((er.cells[1].accuracy_std - 1.0).abs() < 1e-9);
    assert_eq!(s.seeds, vec![0, 1, 2]);
    assert_eq!(base.correlation, vec![Some(1.0); 3]);
}

#[test]
fn relative_accuracy_averages_across_datasets() {
    let a = summarize(&bench_reports(), Method::AlCold, &BTreeMap::new()).unwrap();
    let other = vec![
        synthetic_report(Method::AlCold, 0, &[1, 1, 1], &[1.0; 3], &[0.5, 0.5, 0.5]),
        synthetic_report(Method::Cal(Strategy::Er), 0, &[1, 1, 1], &[1.0; 3], &[0.5, 0.25, 0.4]),
    ];
    let b = summarize(&other, Method::AlCold, &BTreeMap::new()).unwrap();
    let er = Method::Cal(Strategy::Er);
    let avg = mean_relative_accuracy(&[a, b.clone()], er).unwrap();
    let expected = [1.0, (70.0 / 70.0 + 0.5) / 2.0, (79.0 / 80.0 + 0.8) / 2.0];
    for (x, e) in avg.iter().zip(expected) {
        assert!((x - e).abs() < 1e-12, "{avg:?}");
    }
    assert_eq!(mean_relative_accuracy(std::slice::from_ref(&b), Method::AlCold).unwrap(), vec![1.0; 3]);
    assert!(mean_relative_accuracy(&[b], Method::Cal(Strategy::Sd)).is_err());
    assert!(mean_relative_accuracy(&[], er).is_err());
}

#[test]
fn summary_without_baseline_leaves_ratios_empty() {
    let reports: Vec<RunReport> = bench_reports()
        .into_iter()
        .filter(|r| r.method != Method::AlCold)
        .collect();
    let s = summarize(&reports, Method::AlCold, &BTreeMap::new()).unwrap();
    assert!(s.methods[0].cells.iter().all(|c| c.relative_accuracy.is_none()));
    assert!(s.methods[0].correlation.iter().all(Option::is_none));
}

#[test]
fn nan_blocks_emission() {
    let mut s = summarize(&bench_reports(), Method::AlCold, &BTreeMap::new()).unwrap();
    s.methods[0].cells[0].accuracy_mean = f64::NAN;
    assert!(matches!(s.check_finite(), Err(Error::Numeric(_))));
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&s, dir.path()).is_err());
}

#[test]
fn emitted_summary_round_trips_and_is_deterministic() {
    let s = summarize(&bench_reports(), Method::AlCold, &BTreeMap::new()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    emit_report(&s, dir.path()).unwrap();
    assert_eq!(read_summary(&dir.path().join("summary.json")).unwrap(), s);
    let files = ["summary.json", "accuracy.csv", "speedup.csv", "correlation.csv", "forgetting.csv", "robustness.csv"];
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.path().join(f)).unwrap()).collect();
    let mut s2 = summarize(&bench_reports(), Method::AlCold, &BTreeMap::new()).unwrap();
    s2.created_unix = s.created_unix;
    let dir2 = tempfile::tempdir().unwrap();
    emit_report(&s2, dir2.path()).unwrap();
    for (f, bytes) in files.iter().zip(first) {
        assert_eq!(std::fs::read(dir2.path().join(f)).unwrap(), bytes, "{f}");
    }
    let acc = std::fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
    assert!(acc.starts_with("method,10%,20%,30%\n"), "{acc}");
    let forgetting = std::fs::read_to_string(dir.path().join("forgetting.csv")).unwrap();
    assert_eq!(forgetting.lines().count(), 1 + 2 * 6);
}

#[test]
fn budget_labels() {
    assert_eq!(budget_label(1200, 4000), "30%");
    assert_eq!(budget_label(1, 3), "33.333333333333336%");
}

#[test]
fn assignment_paths() {
    let mut doc = serde_json::json!({"strategy": {"alpha": 0.1}, "seeds": [1]});
    set_assignment(&mut doc, "strategy.alpha", serde_json::json!(0.9)).unwrap();
    set_assignment(&mut doc, "model.hidden", serde_json::json!([4])).unwrap();
    assert_eq!(doc["strategy"]["alpha"], 0.9);
    assert_eq!(doc["model"]["hidden"], serde_json::json!([4]));
    assert!(matches!(
        set_assignment(&mut doc, "seeds.x", serde_json::json!(1)),
        Err(Error::Config { .. })
    ));
}

#[test]
fn worker_count_honors_request() {
    if std::env::var("CAL_DETERMINISTIC").is_err() {
        assert_eq!(worker_count(Some(3)), 3);
    }
    assert!(worker_count(None) >= 1);
}
