//! The `cal` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::bench::{emit_report, emit_sweep, run_bench, summarize, sweep, worker_count};
use crate::config::{parse_config, RunConfig};
use crate::data::save_csv;
use crate::error::{Error, Result};
use crate::nn::{save_checkpoint, standard_gradcheck};
use crate::orchestrator::{run_method, Method, RunReport};

/// Largest relative gradient error `gradcheck` accepts.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(name = "cal", version, about = "Continual active learning experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one method with one seed and write its report and final model.
    Run(RunArgs),
    /// Run several methods over several seeds and write summary tables.
    Bench(BenchArgs),
    /// Run a bench for every point of a parameter grid.
    Sweep(SweepArgs),
    /// Write the pool, validation and test splits of a config as CSV.
    GenData(GenDataArgs),
    /// Compare backprop gradients of every loss with finite differences.
    Gradcheck(GradcheckArgs),
    /// Summarize existing run reports.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Method name; defaults to `cal-<strategy.name>` from the config.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Defaults to the first seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Comma-separated method names.
    #[arg(long, default_value = "al,al-ws,cal-er,cal-der,cal-sd")]
    pub methods: String,
    /// Use seeds `0..N` instead of the config's seed list.
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also evaluate final models on corrupted test sets.
    #[arg(long)]
    pub robustness: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// JSON object mapping dotted config paths to value lists, inline or a file path.
    #[arg(long)]
    pub grid: String,
    #[arg(long, default_value = "cal-sd")]
    pub methods: String,
    #[arg(long)]
    pub seeds: Option<u64>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory holding `report-*.json` files.
    #[arg(long)]
    pub reports: PathBuf,
    #[arg(long, default_value = "al")]
    pub baseline: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_methods(list: &str) -> Result<Vec<Method>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

fn seed_list(cfg: &RunConfig, n: Option<u64>) -> Vec<u64> {
    match n {
        Some(n) => (0..n).collect(),
        None => cfg.seeds.clone(),
    }
}

fn write_json(path: &Path, text: String) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn report_file_name(method: Method, seed: u64) -> String {
    format!("report-{method}-seed{seed}.json")
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = parse_config(&a.config)?;
    let method = match &a.strategy {
        Some(s) => s.parse()?,
        None => cfg.default_method(),
    };
    cfg.validate_for(method)?;
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
    let exp = cfg.build_experiment()?;
    let outcome = run_method(&exp, method, seed)?;
    write_json(&out.join(report_file_name(method, seed)), outcome.report.to_json()?)?;
    save_checkpoint(&outcome.model, &out.join(format!("model-{method}-seed{seed}.calm")))?;
    for r in &outcome.report.rounds {
        println!(
            "{method} seed {seed} round {}: labeled {} test {:.4} steps {}",
            r.round, r.labeled_size, r.test_accuracy, r.cumulative_grad_steps
        );
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<()> {
    let cfg = parse_config(&a.config)?;
    let methods = parse_methods(&a.methods)?;
    let seeds = seed_list(&cfg, a.seeds);
    let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
    let run = run_bench(&cfg, &methods, &seeds, worker_count(a.jobs), a.robustness)?;
    for r in &run.reports {
        write_json(&out.join("reports").join(report_file_name(r.method, r.seed)), r.to_json()?)?;
    }
    emit_report(&run.summary, &out)?;
    print_summary(&run.summary);
    Ok(())
}

fn print_summary(s: &crate::bench::BenchSummary) {
    for m in &s.methods {
        let cells: Vec<String> = m
            .cells
            .iter()
            .map(|c| match c.speedup_gradsteps {
                Some(x) => format!("{:.2} ({})", c.accuracy_mean, crate::bench::format_speedup(x)),
                None => format!("{:.2}", c.accuracy_mean),
            })
            .collect();
        println!("{:>9}: {}", m.method.name(), cells.join("  "));
    }
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let base: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = RunConfig::from_json_str(&text)?;
    let grid_text = if a.grid.trim_start().starts_with('{') {
        a.grid.clone()
    } else {
        fs::read_to_string(&a.grid).map_err(|e| Error::io(&a.grid, e))?
    };
    let grid_doc: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&grid_text)?;
    let grid = grid_doc
        .into_iter()
        .map(|(k, v)| match v {
            serde_json::Value::Array(values) => Ok((k, values)),
            _ => Err(Error::config(k, "grid values must be a list")),
        })
        .collect::<Result<Vec<_>>>()?;
    let methods = parse_methods(&a.methods)?;
    let seeds = seed_list(&cfg, a.seeds);
    let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
    let summaries = sweep(&base, &grid, &methods, &seeds, worker_count(a.jobs))?;
    emit_sweep(&summaries, &out)?;
    for s in &summaries {
        println!("{}", serde_json::to_string(&s.assignment)?);
        print_summary(s);
    }
    Ok(())
}

fn cmd_gen_data(a: GenDataArgs) -> Result<()> {
    let cfg = parse_config(&a.config)?;
    let out = a.out.unwrap_or_else(|| cfg.out_dir.clone());
    let exp = cfg.build_experiment()?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    for (name, ds) in [("pool", &exp.pool), ("val", &exp.val), ("test", &exp.test)] {
        let path = out.join(format!("{name}.csv"));
        save_csv(ds, &path)?;
        println!("{}: {} rows", path.display(), ds.len());
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<bool> {
    let mut ok = true;
    for (name, err) in standard_gradcheck(a.seed)? {
        let pass = err <= GRADCHECK_TOLERANCE;
        ok &= pass;
        println!("{name:<14} max relative error {err:.3e} {}", if pass { "ok" } else { "FAIL" });
    }
    Ok(ok)
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<()> {
    let baseline: Method = a.baseline.parse()?;
    let mut paths: Vec<PathBuf> = fs::read_dir(&a.reports)
        .map_err(|e| Error::io(&a.reports, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("report-") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            RunReport::from_json(&text)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut reports = reports;
    reports.sort_by_key(|r| (Method::all().iter().position(|m| *m == r.method), r.seed));
    let summary = summarize(&reports, baseline, &Default::default())?;
    emit_report(&summary, &a.out.unwrap_or_else(|| a.reports.clone()))?;
    print_summary(&summary);
    Ok(())
}

/// Parses `args` (including the program name) and runs the subcommand.
///
/// Returns the process exit code: 0 on success, 1 on failure, 2 on a
/// usage error.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
        Command::Sweep(a) => cmd_sweep(a).map(|_| true),
        Command::GenData(a) => cmd_gen_data(a).map(|_| true),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Analyze(a) => cmd_analyze(a).map(|_| true),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
