//! Outer active-learning loops: cold and warm retraining baselines, naive
//! fine-tuning, and continual active learning with replay.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::acquisition::{entropy_scores, select, select_random, AcquisitionChoice};
use crate::data::{Dataset, Example, PoolState};
use crate::error::{Error, Result};
use crate::nn::{predict, ModelParams};
use crate::replay::{continual_train, record_task_logits, Strategy, StrategyConfig, TrainStreams};
use crate::rng::{stream, Purpose};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// When to stop training within one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergencePolicy {
    pub max_epochs: usize,
    pub patience: usize,
    /// Minimum gain in training accuracy (a fraction) that counts as progress.
    pub min_delta: f64,
}

impl Default for ConvergencePolicy {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            patience: 5,
            min_delta: 0.001,
        }
    }
}

impl ConvergencePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 || self.patience >= self.max_epochs {
            return Err(Error::contract(format!(
                "need 0 <= patience < max_epochs (got {} and {})",
                self.patience, self.max_epochs
            )));
        }
        if !(self.min_delta >= 0.0 && self.min_delta.is_finite()) {
            return Err(Error::contract("min_delta must be a nonnegative number"));
        }
        Ok(())
    }
}

/// True once the best metric has gone `patience` epochs without improving
/// by at least `min_delta`, or after `max_epochs` epochs.
pub fn check_converged(history: &[f64], policy: &ConvergencePolicy) -> bool {
    if history.len() >= policy.max_epochs {
        return true;
    }
    let Some((&first, rest)) = history.split_first() else {
        return false;
    };
    let mut best = first;
    let mut since = 0;
    for &v in rest {
        if v >= best + policy.min_delta {
            best = v;
            since = 0;
        } else {
            since += 1;
        }
    }
    since >= policy.patience
}

/// Round sizes `b_1..b_T` as example counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetSchedule {
    pub seed_size: usize,
    pub increments: Vec<usize>,
}

impl BudgetSchedule {
    pub fn rounds(&self) -> usize {
        1 + self.increments.len()
    }

    /// Size of round `t` (1-based).
    pub fn round_size(&self, t: usize) -> usize {
        if t == 1 {
            self.seed_size
        } else {
            self.increments[t - 2]
        }
    }

    pub fn total(&self) -> usize {
        self.seed_size + self.increments.iter().sum::<usize>()
    }

    /// Labeled-set size after each round.
    pub fn cumulative(&self) -> Vec<usize> {
        (1..=self.rounds())
            .scan(0, |acc, t| {
                *acc += self.round_size(t);
                Some(*acc)
            })
            .collect()
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.seed_size == 0 || self.increments.contains(&0) {
            return Err(Error::config("budget", "every round must label at least one example"));
        }
        if self.total() > pool_size {
            return Err(Error::config(
                "budget",
                format!("total budget {} exceeds pool of {pool_size}", self.total()),
            ));
        }
        Ok(())
    }
}

/// Which outer loop to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    AlCold,
    AlWarm,
    NaiveFinetune,
    Cal(Strategy),
}

impl Method {
    pub fn all() -> Vec<Method> {
        let mut v = vec![Method::AlCold, Method::AlWarm, Method::NaiveFinetune];
        v.extend(Strategy::ALL.map(Method::Cal));
        v
    }

    pub fn name(self) -> String {
        match self {
            Method::AlCold => "al".into(),
            Method::AlWarm => "al-ws".into(),
            Method::NaiveFinetune => "naive-ft".into(),
            Method::Cal(s) => format!("cal-{s}"),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "al" => Ok(Method::AlCold),
            "al-ws" => Ok(Method::AlWarm),
            "naive-ft" => Ok(Method::NaiveFinetune),
            _ => s
                .strip_prefix("cal-")
                .and_then(|rest| rest.parse().ok())
                .map(Method::Cal)
                .ok_or_else(|| Error::contract(format!("unknown method `{s}`"))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Measurements taken at the end of one query round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundRecord {
    pub round: usize,
    pub labeled_size: usize,
    /// Pool indices labeled in this round.
    pub selected: Vec<usize>,
    pub epochs: usize,
    pub grad_steps: u64,
    pub cumulative_grad_steps: u64,
    pub train_ms: f64,
    pub cumulative_train_ms: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    /// Accuracy on each labeled task `D_1..D_t` after this round.
    pub task_accuracies: Vec<f64>,
    /// Predictive entropy of every validation example.
    pub val_entropies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub schema_version: u32,
    pub method: Method,
    pub seed: u64,
    pub pool_size: usize,
    pub config: serde_json::Value,
    pub rounds: Vec<RoundRecord>,
}

impl RunReport {
    /// Zeroes the wall-clock fields, leaving only reproducible content.
    pub fn without_timing(&self) -> RunReport {
        let mut r = self.clone();
        for round in &mut r.rounds {
            round.train_ms = 0.0;
            round.cumulative_train_ms = 0.0;
        }
        r
    }

    pub fn final_round(&self) -> Option<&RoundRecord> {
        self.rounds.last()
    }

    pub fn total_grad_steps(&self) -> u64 {
        self.final_round().map_or(0, |r| r.cumulative_grad_steps)
    }

    pub fn budgets(&self) -> Vec<usize> {
        self.rounds.iter().map(|r| r.labeled_size).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Everything a run needs besides the method and seed.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub pool: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// Task-stream mode: round `t` may only select from `streams[t - 1]`.
    pub streams: Option<Vec<Vec<usize>>>,
    pub hidden: Vec<usize>,
    pub budget: BudgetSchedule,
    pub acquisition: AcquisitionChoice,
    pub strategy: StrategyConfig,
    pub convergence: ConvergencePolicy,
    /// Resolved configuration copied into every report.
    pub config_echo: serde_json::Value,
}

impl Experiment {
    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.pool.dim()];
        dims.extend(&self.hidden);
        dims.push(self.pool.num_classes());
        dims
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate(self.pool.len())?;
        self.convergence.validate()?;
        if self.val.is_empty() || self.test.is_empty() {
            return Err(Error::config("split", "validation and test sets must be nonempty"));
        }
        if let Some(streams) = &self.streams {
            if streams.len() < self.budget.rounds() {
                return Err(Error::config(
                    "budget",
                    format!(
                        "{} rounds but only {} tasks in the stream",
                        self.budget.rounds(),
                        streams.len()
                    ),
                ));
            }
            for t in 1..=self.budget.rounds() {
                if self.budget.round_size(t) > streams[t - 1].len() {
                    return Err(Error::config(
                        "budget",
                        format!("round {t} asks for more examples than task {t} holds"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn candidates(&self, state: &PoolState, t: usize) -> Vec<usize> {
        match &self.streams {
            None => state.unlabeled(),
            Some(streams) => {
                let unlabeled = state.unlabeled();
                let mut c: Vec<usize> = streams[t - 1]
                    .iter()
                    .copied()
                    .filter(|i| unlabeled.binary_search(i).is_ok())
                    .collect();
                c.sort_unstable();
                c
            }
        }
    }
}

/// A finished run: its report and the last round's model.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub model: ModelParams,
}

pub fn accuracy(model: &ModelParams, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Err(Error::contract("accuracy of an empty dataset"));
    }
    let pred = predict(model, &ds.features())?;
    let hits = pred.iter().zip(ds.examples()).filter(|(p, e)| **p == e.label).count();
    Ok(hits as f64 / ds.len() as f64)
}

fn task_examples(pool: &Dataset, indices: &[usize], task: usize) -> Vec<Example> {
    indices
        .iter()
        .map(|&i| {
            let mut e = pool.get(i).clone();
            e.task_id = Some(task);
            e
        })
        .collect()
}

/// Runs `method` on `exp` with `seed`.
pub fn run_method(exp: &Experiment, method: Method, seed: u64) -> Result<RunOutcome> {
    exp.validate()?;
    let dims = exp.dims();
    let rounds = exp.budget.rounds();
    let mut cfg = exp.strategy.clone();
    match method {
        Method::Cal(s) => cfg.strategy = s,
        _ => {
            cfg.strategy = Strategy::Er;
            cfg.m_h = 0;
        }
    }
    cfg.validate()?;

    let mut state = PoolState::new(exp.pool.len());
    let seed_set = select_random(
        &exp.candidates(&state, 1),
        exp.budget.round_size(1),
        &mut stream(seed, 1, Purpose::SeedSet),
    );
    state.label(&seed_set)?;

    let mut model = ModelParams::init(&dims, &mut stream(seed, 1, Purpose::Init))?;
    let mut history: Vec<Example> = Vec::new();
    let mut records = Vec::with_capacity(rounds);
    let mut cumulative_steps = 0u64;
    let mut cumulative_ms = 0.0;

    for t in 1..=rounds {
        let new_indices = state.tasks()[t - 1].clone();
        let mut d_t = task_examples(&exp.pool, &new_indices, t - 1);

        if method == Method::AlCold && t > 1 {
            model = ModelParams::init(&dims, &mut stream(seed, t, Purpose::Init))?;
        }
        model.reset_momentum();
        let labeled_all;
        let (train_set, replay_from): (&[Example], &[Example]) = match method {
            Method::AlCold | Method::AlWarm => {
                labeled_all = task_examples(&exp.pool, &state.labeled(), 0);
                (&labeled_all, &[])
            }
            Method::NaiveFinetune => (&d_t, &[]),
            Method::Cal(_) => (&d_t, &history),
        };
        let mut shuffle = stream(seed, t, Purpose::Shuffle);
        let mut replay = stream(seed, t, Purpose::Replay);
        let started = Instant::now();
        let outcome = continual_train(
            &mut model,
            train_set,
            replay_from,
            &cfg,
            &exp.convergence,
            TrainStreams {
                shuffle: &mut shuffle,
                replay: &mut replay,
            },
        )?;
        let train_ms = started.elapsed().as_secs_f64() * 1e3;

        if let Method::Cal(s) = method {
            if s.uses_stored_logits() {
                record_task_logits(&model, &mut d_t)?;
            }
            history.extend(d_t);
        }

        cumulative_steps += outcome.grad_steps;
        cumulative_ms += train_ms;
        let task_accuracies = state
            .tasks()
            .iter()
            .map(|task| accuracy(&model, &exp.pool.subset(task)))
            .collect::<Result<Vec<_>>>()?;
        let all_val: Vec<usize> = (0..exp.val.len()).collect();
        records.push(RoundRecord {
            round: t,
            labeled_size: state.num_labeled(),
            selected: new_indices,
            epochs: outcome.epochs,
            grad_steps: outcome.grad_steps,
            cumulative_grad_steps: cumulative_steps,
            train_ms,
            cumulative_train_ms: cumulative_ms,
            train_accuracy: outcome.final_metric(),
            val_accuracy: accuracy(&model, &exp.val)?,
            test_accuracy: accuracy(&model, &exp.test)?,
            task_accuracies,
            val_entropies: entropy_scores(&model, &exp.val, &all_val)?,
        });

        if t < rounds {
            let picked = select(
                &exp.acquisition,
                &model,
                &exp.pool,
                &exp.candidates(&state, t + 1),
                exp.budget.round_size(t + 1),
                &mut stream(seed, t + 1, Purpose::Acquisition),
            )?;
            state.label(&picked)?;
            state.validate()?;
        }
    }

    Ok(RunOutcome {
        report: RunReport {
            schema_version: REPORT_SCHEMA_VERSION,
            method,
            seed,
            pool_size: exp.pool.len(),
            config: exp.config_echo.clone(),
            rounds: records,
        },
        model,
    })
}

/// Baseline active learning: every round retrains from a fresh random
/// initialization on the whole labeled set.
pub fn run_al_cold(exp: &Experiment, seed: u64) -> Result<RunOutcome> {
    run_method(exp, Method::AlCold, seed)
}

/// Active learning that keeps the previous round's weights but still
/// trains on the whole labeled set.
pub fn run_al_warm(exp: &Experiment, seed: u64) -> Result<RunOutcome> {
    run_method(exp, Method::AlWarm, seed)
}

/// Warm start, trained only on the newly labeled points.
pub fn run_naive_finetune(exp: &Experiment, seed: u64) -> Result<RunOutcome> {
    run_method(exp, Method::NaiveFinetune, seed)
}

/// Continual active learning with the given replay strategy.
pub fn run_cal(exp: &Experiment, strategy: Strategy, seed: u64) -> Result<RunOutcome> {
    run_method(exp, Method::Cal(strategy), seed)
}
