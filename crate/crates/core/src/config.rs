//! JSON run configuration.
//!
//! Unknown keys are rejected and every error names the JSON path of the
//! offending field, e.g. `strategy.sigma`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::acquisition::AcquisitionChoice;
use crate::data::{gen_blobs, gen_drift_tasks, load_csv, split, Dataset, NormStats};
use crate::error::{Error, Result};
use crate::orchestrator::{BudgetSchedule, ConvergencePolicy, Experiment, Method};
use crate::replay::{Strategy, StrategyConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSpec {
    Blobs {
        k: usize,
        n_per_class: usize,
        d: usize,
        spread: f64,
        seed: u64,
    },
    Drift {
        k: usize,
        n_per_task: usize,
        d: usize,
        n_tasks: usize,
        drift: f64,
        spread: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            hidden: default_hidden(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    Count,
    Fraction,
}

/// Round sizes either as counts or as fractions of the pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default = "default_unit")]
    pub unit: BudgetUnit,
    #[serde(default = "default_seed_budget")]
    pub seed: f64,
    #[serde(default = "default_increments")]
    pub increments: Vec<f64>,
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            unit: default_unit(),
            seed: default_seed_budget(),
            increments: default_increments(),
        }
    }
}

impl BudgetSpec {
    pub fn resolve(&self, pool_size: usize) -> Result<BudgetSchedule> {
        let one = |v: f64, path: String| -> Result<usize> {
            let n = match self.unit {
                BudgetUnit::Count if v >= 1.0 && v.fract() == 0.0 => v as usize,
                BudgetUnit::Count => {
                    return Err(Error::config(path, format!("{v} is not a positive count")))
                }
                BudgetUnit::Fraction if v > 0.0 && v <= 1.0 => {
                    (v * pool_size as f64).round() as usize
                }
                BudgetUnit::Fraction => {
                    return Err(Error::config(path, format!("{v} is not a fraction in (0, 1]")))
                }
            };
            if n == 0 {
                return Err(Error::config(path, "round would label no examples"));
            }
            Ok(n)
        };
        let schedule = BudgetSchedule {
            seed_size: one(self.seed, "budget.seed".into())?,
            increments: self
                .increments
                .iter()
                .enumerate()
                .map(|(i, &v)| one(v, format!("budget.increments[{i}]")))
                .collect::<Result<_>>()?,
        };
        schedule.validate(pool_size)?;
        Ok(schedule)
    }
}

/// Replay settings; `m_h` defaults to `m`, `sigma` has no default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    #[serde(default = "default_strategy")]
    pub name: Strategy,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default)]
    pub m_h: Option<usize>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default = "default_lambda_com")]
    pub lambda_com: f64,
    #[serde(default = "default_c")]
    pub c: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
}

impl Default for StrategySpec {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all strategy fields have defaults")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetSpec,
    /// Pool, validation and test fractions.
    #[serde(default = "default_split")]
    pub split: [f64; 3],
    #[serde(default = "default_true")]
    pub normalize: bool,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub acquisition: AcquisitionChoice,
    #[serde(default)]
    pub strategy: StrategySpec,
    #[serde(default)]
    pub convergence: ConvergencePolicy,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_hidden() -> Vec<usize> {
    vec![32, 32]
}
fn default_unit() -> BudgetUnit {
    BudgetUnit::Fraction
}
fn default_seed_budget() -> f64 {
    0.1
}
fn default_increments() -> Vec<f64> {
    vec![0.1, 0.1]
}
fn default_strategy() -> Strategy {
    Strategy::Er
}
fn default_m() -> usize {
    32
}
fn default_alpha() -> f64 {
    0.5
}
fn default_beta() -> f64 {
    1.0
}
fn default_lambda_com() -> f64 {
    1.0
}
fn default_c() -> usize {
    128
}
fn default_lr() -> f64 {
    0.02
}
fn default_momentum() -> f64 {
    0.5
}
fn default_split() -> [f64; 3] {
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]
}
fn default_true() -> bool {
    true
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn ensure(ok: bool, path: &str, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(path, msg))
    }
}

impl RunConfig {
    /// Parses JSON text; errors name the path of the offending field.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        cfg.strategy.m_h.get_or_insert(cfg.strategy.m);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Default method for `run`: continual learning with the configured strategy.
    pub fn default_method(&self) -> Method {
        Method::Cal(self.strategy.name)
    }

    /// Checks every constraint, including those of the configured strategy.
    pub fn validate(&self) -> Result<()> {
        self.validate_common()?;
        self.validate_for(self.default_method())
    }

    /// Checks the fields that `method` needs.
    pub fn validate_for(&self, method: Method) -> Result<()> {
        let s = &self.strategy;
        let m_h = s.m_h.unwrap_or(s.m);
        if let Method::Cal(strategy) = method {
            match strategy {
                Strategy::Sds2 => {
                    let sigma = s
                        .sigma
                        .ok_or_else(|| Error::config("strategy.sigma", "required by sds2"))?;
                    ensure(sigma > 0.0 && sigma.is_finite(), "strategy.sigma", "must be positive")?;
                    ensure(s.c >= m_h, "strategy.c", format!("must be at least m_h = {m_h}"))?;
                    ensure((0.0..=1.0).contains(&s.alpha), "strategy.alpha", "must lie in [0, 1]")?;
                }
                Strategy::Mir => {
                    ensure(s.c >= m_h, "strategy.c", format!("must be at least m_h = {m_h}"))?;
                }
                Strategy::Sd => {
                    ensure((0.0..=1.0).contains(&s.alpha), "strategy.alpha", "must lie in [0, 1]")?;
                }
                Strategy::Der => {
                    ensure(s.alpha >= 0.0, "strategy.alpha", "must be nonnegative")?;
                    ensure(s.beta >= 0.0, "strategy.beta", "must be nonnegative")?;
                }
                Strategy::Er => {}
            }
        }
        Ok(())
    }

    fn validate_common(&self) -> Result<()> {
        match &self.dataset {
            DatasetSpec::Blobs { k, n_per_class, d, spread, .. } => {
                ensure(*k >= 2, "dataset.k", "need at least 2 classes")?;
                ensure(*n_per_class >= 1, "dataset.n_per_class", "must be positive")?;
                ensure(*d >= 1, "dataset.d", "must be positive")?;
                ensure(*spread > 0.0, "dataset.spread", "must be positive")?;
            }
            DatasetSpec::Drift { k, n_per_task, d, n_tasks, drift, spread, .. } => {
                ensure(*k >= 2, "dataset.k", "need at least 2 classes")?;
                ensure(*n_per_task >= *k, "dataset.n_per_task", "must be at least k")?;
                ensure(*d >= 2, "dataset.d", "drift needs at least 2 dimensions")?;
                ensure(*n_tasks >= 2, "dataset.n_tasks", "need at least 2 tasks")?;
                ensure(*drift >= 0.0, "dataset.drift", "must be nonnegative")?;
                ensure(*spread > 0.0, "dataset.spread", "must be positive")?;
            }
            DatasetSpec::Csv { .. } => {}
        }
        let [ft, fv, fs] = self.split;
        ensure(
            self.split.iter().all(|f| (0.0..=1.0).contains(f)),
            "split",
            "fractions must lie in [0, 1]",
        )?;
        ensure(
            (ft + fv + fs - 1.0).abs() <= 1e-9,
            "split",
            format!("fractions sum to {}, not 1", ft + fv + fs),
        )?;
        ensure(ft > 0.0 && fv > 0.0 && fs > 0.0, "split", "every part must be nonempty")?;
        ensure(!self.model.hidden.contains(&0), "model.hidden", "layer widths must be positive")?;
        if let AcquisitionChoice::Fass { c, sigma } = self.acquisition {
            ensure(c >= 1.0 && c.is_finite(), "acquisition.c", "must be at least 1")?;
            ensure(sigma > 0.0 && sigma.is_finite(), "acquisition.sigma", "must be positive")?;
        }
        let s = &self.strategy;
        ensure(s.m >= 1, "strategy.m", "must be positive")?;
        ensure(s.lr > 0.0 && s.lr.is_finite(), "strategy.lr", "must be positive")?;
        ensure((0.0..1.0).contains(&s.momentum), "strategy.momentum", "must lie in [0, 1)")?;
        ensure(s.weight_decay >= 0.0, "strategy.weight_decay", "must be nonnegative")?;
        ensure(s.lambda_com >= 0.0, "strategy.lambda_com", "must be nonnegative")?;
        let c = &self.convergence;
        ensure(c.max_epochs >= 1, "convergence.max_epochs", "must be positive")?;
        ensure(c.patience < c.max_epochs, "convergence.patience", "must be below max_epochs")?;
        ensure(c.min_delta >= 0.0, "convergence.min_delta", "must be nonnegative")?;
        ensure(!self.seeds.is_empty(), "seeds", "need at least one seed")?;
        Ok(())
    }

    /// Strategy settings with every default resolved.
    pub fn strategy_config(&self, strategy: Strategy) -> StrategyConfig {
        let s = &self.strategy;
        StrategyConfig {
            strategy,
            m: s.m,
            m_h: s.m_h.unwrap_or(s.m),
            alpha: s.alpha,
            beta: s.beta,
            sigma: s.sigma.unwrap_or(1.0),
            lambda_com: s.lambda_com,
            c: s.c,
            lr: s.lr,
            momentum: s.momentum,
            weight_decay: s.weight_decay,
        }
    }

    /// Generates or loads the data, splits it and resolves the budget.
    pub fn build_experiment(&self) -> Result<Experiment> {
        let fractions = (self.split[0], self.split[1], self.split[2]);
        let (pool, val, test, streams) = match &self.dataset {
            DatasetSpec::Blobs { k, n_per_class, d, spread, seed } => {
                let ds = gen_blobs(*k, *n_per_class, *d, *spread, *seed)?;
                let (p, v, t) = split(&ds, fractions, *seed)?;
                (p, v, t, None)
            }
            DatasetSpec::Drift { k, n_per_task, d, n_tasks, drift, spread, seed } => {
                let tasks = gen_drift_tasks(*k, *n_per_task, *d, *n_tasks, *drift, *spread, *seed)?;
                let (mut pools, mut vals, mut tests) = (Vec::new(), Vec::new(), Vec::new());
                for (t, task) in tasks.iter().enumerate() {
                    let (p, v, s) = split(task, fractions, seed.wrapping_add(t as u64))?;
                    pools.push(p);
                    vals.push(v);
                    tests.push(s);
                }
                let mut streams = Vec::new();
                let mut start = 0;
                for p in &pools {
                    streams.push((start..start + p.len()).collect());
                    start += p.len();
                }
                (
                    Dataset::concat("pool", &pools)?,
                    Dataset::concat("val", &vals)?,
                    Dataset::concat("test", &tests)?,
                    Some(streams),
                )
            }
            DatasetSpec::Csv { path, seed } => {
                let ds = load_csv(path)?;
                let (p, v, t) = split(&ds, fractions, *seed)?;
                (p, v, t, None)
            }
        };
        let (pool, val, test) = if self.normalize {
            let stats = NormStats::fit(&pool)?;
            (stats.apply(&pool), stats.apply(&val), stats.apply(&test))
        } else {
            (pool, val, test)
        };
        let budget = self.budget.resolve(pool.len())?;
        let exp = Experiment {
            pool,
            val,
            test,
            streams,
            hidden: self.model.hidden.clone(),
            budget,
            acquisition: self.acquisition,
            strategy: self.strategy_config(self.strategy.name),
            convergence: self.convergence.clone(),
            config_echo: serde_json::to_value(self)?,
        };
        exp.validate()?;
        Ok(exp)
    }
}

/// Reads and validates a config file.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_json_str(&text)
}
