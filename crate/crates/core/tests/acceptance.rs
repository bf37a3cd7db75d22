//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use cal_core::bench::{
    compute_speedup, emit_report, format_speedup, pearson, relative_accuracy, run_bench, summarize, sweep,
    BenchRun, CostBasis,
};
use cal_core::nn::standard_gradcheck;
use cal_core::orchestrator::{Method, RunReport};
use cal_core::replay::{lambda_schedule, Strategy};
use cal_core::submodular::{greedy_maximize, greedy_maximize_naive};
use common::instances::{exhaustive_optimum, objective, random_instance};
use common::{blobs, blobs_json, drift, mean};
use serde_json::json;

type Outcome = Result<String, String>;

const SEEDS: [u64; 3] = [0, 1, 2];
const CAL: [Strategy; 5] = [Strategy::Er, Strategy::Mir, Strategy::Der, Strategy::Sd, Strategy::Sds2];

fn within(limit: Duration, start: Instant) -> std::result::Result<(), String> {
    let spent = start.elapsed();
    if spent <= limit {
        Ok(())
    } else {
        Err(format!("took {spent:.1?}, limit {limit:?}"))
    }
}

fn check(cond: bool, msg: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg)
    }
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let errs = standard_gradcheck(0).map_err(|e| e.to_string())?;
    within(Duration::from_secs(10), start)?;
    let worst = errs.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let detail = errs.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", ");
    check(worst <= 1e-4, format!("max relative error above 1e-4: {detail}"))?;
    Ok(detail)
}

fn submodular_oracle() -> Outcome {
    let start = Instant::now();
    let bound = 1.0 - (-1.0f64).exp();
    let mut worst_ratio = f64::INFINITY;
    for seed in 0..50 {
        let (inst, raw) = random_instance(seed, 10);
        let opt = exhaustive_optimum(&raw, 3);
        let got = objective(&raw, &greedy_maximize(&inst, 3).map_err(|e| e.to_string())?.selected);
        worst_ratio = worst_ratio.min(got / opt);
        check(got >= bound * opt, format!("instance {seed}: {got} < (1-1/e) * {opt}"))?;
    }
    for seed in 0..100 {
        let (inst, _) = random_instance(10_000 + seed, 10);
        let lazy = greedy_maximize(&inst, 3).map_err(|e| e.to_string())?;
        let naive = greedy_maximize_naive(&inst, 3).map_err(|e| e.to_string())?;
        check(lazy.selected == naive.selected, format!("instance {seed}: lazy and naive differ"))?;
    }
    within(Duration::from_secs(60), start)?;
    Ok(format!("worst greedy/optimum {worst_ratio:.4}, lazy == naive on 100"))
}

fn final_drop(run: &BenchRun, m: Method) -> f64 {
    let drops: Vec<f64> = run
        .reports
        .iter()
        .filter(|r| r.method == m)
        .map(|r| 100.0 * cal_core::bench::forgetting_matrix(r).mean_final_drop().unwrap())
        .collect();
    mean(&drops)
}

fn forgetting() -> Outcome {
    let start = Instant::now();
    let methods = [Method::NaiveFinetune, Method::Cal(Strategy::Er)];
    let run = run_bench(&drift(), &methods, &SEEDS, 3, false).map_err(|e| e.to_string())?;
    within(Duration::from_secs(300), start)?;
    let naive = final_drop(&run, methods[0]);
    let cal = final_drop(&run, methods[1]);
    check(naive >= 15.0, format!("naive drop {naive:.1} < 15"))?;
    check(cal <= 5.0, format!("cal-er drop {cal:.1} > 5"))?;
    Ok(format!("mean final drop: naive-ft {naive:.1}, cal-er {cal:.1} points"))
}

fn blobs_bench() -> std::result::Result<BenchRun, String> {
    let mut methods = vec![Method::AlCold];
    methods.extend(CAL.map(Method::Cal));
    run_bench(&blobs(), &methods, &SEEDS, 4, false).map_err(|e| e.to_string())
}

fn parity_and_speedup(run: &BenchRun, elapsed: Duration) -> Outcome {
    check(elapsed <= Duration::from_secs(600), format!("took {elapsed:.1?}"))?;
    let base = run.summary.method(Method::AlCold).unwrap().cells.last().unwrap().accuracy_mean;
    let mut parts = vec![format!("al {base:.2}")];
    for s in [Strategy::Er, Strategy::Der, Strategy::Sd] {
        let m = Method::Cal(s);
        let cell = run.summary.method(m).unwrap().cells.last().unwrap().clone();
        let ratio = 1.0 / cell.speedup_gradsteps.unwrap();
        check(
            (cell.accuracy_mean - base).abs() <= 2.0,
            format!("{m} final accuracy {:.2} vs al {base:.2}", cell.accuracy_mean),
        )?;
        check(ratio <= 0.6, format!("{m} step ratio {ratio:.3} > 0.6"))?;
        parts.push(format!("{m} {:.2} steps x{ratio:.2}", cell.accuracy_mean));
    }
    Ok(parts.join(", "))
}

fn entropy_correlation(run: &BenchRun) -> Outcome {
    let baseline: BTreeMap<u64, &RunReport> = run
        .reports
        .iter()
        .filter(|r| r.method == Method::AlCold)
        .map(|r| (r.seed, r))
        .collect();
    let mut lowest = f64::INFINITY;
    for r in run.reports.iter().filter(|r| matches!(r.method, Method::Cal(_))) {
        let b = baseline[&r.seed];
        for (cal, base) in r.rounds.iter().zip(&b.rounds) {
            let rho = pearson(&cal.val_entropies, &base.val_entropies).map_err(|e| e.to_string())?;
            lowest = lowest.min(rho);
            check(rho > 0.0, format!("{} seed {} round {}: r = {rho:.3}", r.method, r.seed, cal.round))?;
        }
    }
    Ok(format!("lowest r {lowest:.3} over 5 strategies x 3 seeds x 3 rounds"))
}

fn lambda() -> Outcome {
    let b = 400;
    let mut prev = f64::INFINITY;
    for t in 1..=50usize {
        let l = lambda_schedule(b, (t - 1) * b).map_err(|e| e.to_string())?;
        check(l == 1.0 / t as f64, format!("round {t}: {l} != 1/{t}"))?;
        check(l < prev, format!("round {t}: not strictly decreasing"))?;
        prev = l;
    }
    Ok("lambda_t == 1/t for t = 1..50".into())
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, blobs_json().to_string()).map_err(|e| e.to_string())?;
    let bench = |out: &str| -> std::result::Result<(), String> {
        let status = Command::new(env!("CARGO_BIN_EXE_cal"))
            .env("CAL_DETERMINISTIC", "1")
            .args(["bench", "--methods", "al,al-ws,naive-ft,cal-er,cal-mir,cal-der,cal-sd,cal-sds2", "--seeds", "2"])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(out))
            .output()
            .map_err(|e| e.to_string())?
            .status;
        check(status.success(), format!("bench exited with {status}"))
    };
    bench("a")?;
    bench("b")?;
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a/reports"))
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    check(names.len() == 16, format!("expected 16 reports, found {}", names.len()))?;
    for name in &names {
        let load = |side: &str| -> std::result::Result<String, String> {
            let text = fs::read_to_string(dir.path().join(side).join("reports").join(name)).map_err(|e| e.to_string())?;
            let r = RunReport::from_json(&text).map_err(|e| e.to_string())?;
            r.without_timing().to_json().map_err(|e| e.to_string())
        };
        check(load("a")? == load("b")?, format!("{name:?} differs"))?;
    }
    Ok(format!("{} reports identical apart from timing", names.len()))
}

fn sensitivity() -> Outcome {
    let grid = vec![(
        "strategy.alpha".to_string(),
        vec![json!(0.1), json!(0.25), json!(0.75), json!(0.9)],
    )];
    let points = sweep(&blobs_json(), &grid, &[Method::Cal(Strategy::Sd)], &SEEDS, 4).map_err(|e| e.to_string())?;
    let finals: Vec<f64> = points
        .iter()
        .map(|p| p.methods[0].cells.last().unwrap().accuracy_mean)
        .collect();
    let spread = finals.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - finals.iter().copied().fold(f64::INFINITY, f64::min);
    let shown = finals.iter().map(|a| format!("{a:.2}")).collect::<Vec<_>>().join("/");
    check(spread <= 2.0, format!("spread {spread:.2} over alpha: {shown}"))?;
    Ok(format!("final accuracy {shown}, spread {spread:.2}"))
}

fn table_arithmetic() -> Outcome {
    let (al, er) = common::tables::fixtures();
    check(relative_accuracy(94.9, 94.9).map_err(|e| e.to_string())? == 1.0, "relative accuracy".into())?;
    let s = compute_speedup(&al, &er, CostBasis::Wallclock).map_err(|e| e.to_string())?;
    let shown: Vec<String> = s.iter().map(|&x| format_speedup(x)).collect();
    check(shown == ["1.5×", "1.4×", "2.0×", "2.4×", "2.8×"], format!("speedups {shown:?}"))?;
    let summary = summarize(&[al, er], Method::AlCold, &BTreeMap::new()).map_err(|e| e.to_string())?;
    let cell = summary.method(Method::Cal(Strategy::Er)).unwrap().cells.last().unwrap().clone();
    check(cell.accuracy_mean == 94.9, format!("accuracy {}", cell.accuracy_mean))?;
    check(cell.relative_accuracy == Some(1.0), format!("relative {:?}", cell.relative_accuracy))?;
    let rendered = format_speedup(cell.speedup_wallclock.unwrap_or(f64::NAN));
    check(rendered == "2.8×", format!("rendered {rendered}"))?;
    let base = summary.method(Method::AlCold).unwrap().cells.last().unwrap().clone();
    check(format_speedup(base.speedup_wallclock.unwrap()) == "1.0×", "baseline speedup".into())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_report(&summary, dir.path()).map_err(|e| e.to_string())?;
    let text = fs::read_to_string(dir.path().join("accuracy.csv")).map_err(|e| e.to_string())?;
    let row = text.lines().find(|l| l.starts_with("cal-er,")).unwrap_or_default();
    let last: f64 = row.rsplit(',').next().and_then(|v| v.parse().ok()).unwrap_or(f64::NAN);
    check(last == 94.9, format!("accuracy.csv cell {last}"))?;
    Ok("94.9/94.9 = 1, 140/50 ms renders 2.8×".into())
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 gradient check", gradients()));
    results.push(("2 submodular oracle", submodular_oracle()));
    results.push(("3 forgetting on drifting tasks", forgetting()));
    let start = Instant::now();
    let blobs_run = blobs_bench();
    let elapsed = start.elapsed();
    match &blobs_run {
        Ok(run) => {
            results.push(("4 accuracy parity and step speedup", parity_and_speedup(run, elapsed)));
            results.push(("5 entropy correlation", entropy_correlation(run)));
        }
        Err(e) => {
            results.push(("4 accuracy parity and step speedup", Err(e.clone())));
            results.push(("5 entropy correlation", Err(e.clone())));
        }
    }
    results.push(("6 lambda schedule", lambda()));
    results.push(("7 determinism", determinism()));
    results.push(("8 alpha sensitivity", sensitivity()));
    results.push(("9 table arithmetic", table_arithmetic()));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
