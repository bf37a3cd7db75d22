use std::collections::BTreeMap;

use itertools::Itertools;
use rayon::prelude::*;

use super::{robustness_suite, summarize, BenchSummary, RobustnessTable};
use crate::config::RunConfig;
use crate::data::Corruption;
use crate::error::{Error, Result};
use crate::orchestrator::{run_method, Method, RunReport};
use crate::rng::{derive_seed, Purpose};

/// Reports of every (method, seed) run plus their summary.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub reports: Vec<RunReport>,
    pub summary: BenchSummary,
}

/// Worker threads to use: 1 when `CAL_DETERMINISTIC=1`, otherwise the
/// request or the number of available cores.
pub fn worker_count(requested: Option<usize>) -> usize {
    if std::env::var("CAL_DETERMINISTIC").is_ok_and(|v| v == "1") {
        return 1;
    }
    requested
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every method for every seed on the experiment described by `cfg`.
///
/// Runs are independent and execute on `jobs` threads; results are
/// gathered in (method, seed) order. With `robustness`, each final model
/// is also evaluated on corrupted test sets.
pub fn run_bench(
    cfg: &RunConfig,
    methods: &[Method],
    seeds: &[u64],
    jobs: usize,
    robustness: bool,
) -> Result<BenchRun> {
    if methods.is_empty() || seeds.is_empty() {
        return Err(Error::contract("bench needs at least one method and one seed"));
    }
    for &m in methods {
        cfg.validate_for(m)?;
    }
    let exp = cfg.build_experiment()?;
    let work: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|&m| seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::contract(format!("thread pool: {e}")))?;
    let results: Vec<Result<(RunReport, Option<RobustnessTable>)>> = pool.install(|| {
        work.par_iter()
            .map(|&(m, seed)| {
                let out = run_method(&exp, m, seed)?;
                let table = if robustness {
                    let s = derive_seed(seed, 0, Purpose::Data);
                    Some(robustness_suite(&out.model, &exp.test, &Corruption::ALL, s)?)
                } else {
                    None
                };
                Ok((out.report, table))
            })
            .collect()
    });
    let mut reports = Vec::with_capacity(results.len());
    let mut tables: BTreeMap<String, Vec<RobustnessTable>> = BTreeMap::new();
    for r in results {
        let (report, table) = r?;
        if let Some(t) = table {
            tables.entry(report.method.name()).or_default().push(t);
        }
        reports.push(report);
    }
    let summary = summarize(&reports, Method::AlCold, &tables)?;
    Ok(BenchRun { reports, summary })
}

/// Sets a dotted JSON path such as `strategy.alpha`, creating objects.
pub fn set_assignment(doc: &mut serde_json::Value, key: &str, value: serde_json::Value) -> Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(key, format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::json!({}));
    }
    Err(Error::config(key, "empty key"))
}

/// One bench per point of the Cartesian product of `grid`, all with the
/// same seeds. Each summary records its assignment.
pub fn sweep(
    base: &serde_json::Value,
    grid: &[(String, Vec<serde_json::Value>)],
    methods: &[Method],
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<BenchSummary>> {
    if grid.is_empty() || grid.iter().any(|(_, v)| v.is_empty()) {
        return Err(Error::contract("sweep grid must have at least one value per key"));
    }
    let points: Vec<Vec<(&String, &serde_json::Value)>> = grid
        .iter()
        .map(|(k, values)| values.iter().map(move |v| (k, v)).collect::<Vec<_>>())
        .multi_cartesian_product()
        .collect();
    let mut summaries = Vec::with_capacity(points.len());
    for point in points {
        let mut doc = base.clone();
        for (k, v) in &point {
            set_assignment(&mut doc, k, (*v).clone())?;
        }
        let cfg = RunConfig::from_json_str(&doc.to_string()).map_err(|e| match e {
            Error::Config { path, msg } => {
                let key = point
                    .iter()
                    .map(|(k, _)| k.as_str())
                    .find(|k| path.starts_with(*k) || k.starts_with(path.as_str()))
                    .unwrap_or(path.as_str())
                    .to_string();
                Error::config(key, msg)
            }
            other => other,
        })?;
        let mut run = run_bench(&cfg, methods, seeds, jobs, false)?;
        run.summary.assignment = point
            .iter()
            .map(|(k, v)| ((*k).clone(), (*v).clone()))
            .collect();
        summaries.push(run.summary);
    }
    Ok(summaries)
}
