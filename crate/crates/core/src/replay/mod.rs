//! Replay-based continual training: what to replay, which loss to apply,
//! and the inner training loop that runs on each newly labeled task.

mod train;

pub use train::{continual_train, TrainOutcome, TrainStreams};

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{score_entropy, select_top_b};
use crate::data::{features_of, Example};
use crate::error::{Error, Result};
use crate::nn::{
    backward, backward_from_logit_grad, forward, softmax_rows, Gradients, LossSpec, Matrix,
    ModelParams, SgdConfig, Targets, PROB_EPS,
};
use crate::rng::StreamRng;
use crate::submodular::{greedy_maximize, SubmodularInstance};

/// Replay strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Uniform replay, cross-entropy on the joint batch.
    Er,
    /// Replay the samples a virtual step would hurt most.
    Mir,
    /// Uniform replay with logit matching.
    Der,
    /// Uniform replay with scaled KL distillation.
    Sd,
    /// Scaled distillation with submodular replay selection.
    Sds2,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Er,
        Strategy::Mir,
        Strategy::Der,
        Strategy::Sd,
        Strategy::Sds2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Er => "er",
            Strategy::Mir => "mir",
            Strategy::Der => "der",
            Strategy::Sd => "sd",
            Strategy::Sds2 => "sds2",
        }
    }

    /// Whether replayed samples need their recorded logits.
    pub fn uses_stored_logits(self) -> bool {
        matches!(self, Strategy::Der | Strategy::Sd | Strategy::Sds2)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::contract(format!("unknown strategy `{s}`")))
    }
}

/// Replay hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    /// Current-task minibatch size.
    pub m: usize,
    /// Replay minibatch size.
    pub m_h: usize,
    pub alpha: f64,
    pub beta: f64,
    /// RBF bandwidth for SDS2.
    pub sigma: f64,
    /// Weight of the concave uncertainty term in SDS2.
    pub lambda_com: f64,
    /// History subsample size for MIR and SDS2.
    pub c: usize,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl StrategyConfig {
    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::contract("m must be at least 1"));
        }
        match self.strategy {
            Strategy::Sd | Strategy::Sds2 if !(0.0..=1.0).contains(&self.alpha) => {
                return Err(Error::contract(format!("alpha {} not in [0, 1]", self.alpha)))
            }
            Strategy::Der if !(self.alpha >= 0.0 && self.beta >= 0.0) => {
                return Err(Error::contract("der needs alpha, beta >= 0"))
            }
            _ => {}
        }
        if matches!(self.strategy, Strategy::Mir | Strategy::Sds2) && self.c < self.m_h {
            return Err(Error::contract(format!(
                "candidate count c = {} is below m_h = {}",
                self.c, self.m_h
            )));
        }
        if self.strategy == Strategy::Sds2 && !(self.sigma > 0.0) {
            return Err(Error::contract("sds2 needs sigma > 0"));
        }
        self.sgd().validate()
    }
}

/// Rows of history chosen for one replay step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplayBatch {
    /// Indices into the history slice.
    pub source: Vec<usize>,
}

impl ReplayBatch {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn examples<'a>(&'a self, history: &'a [Example]) -> impl Iterator<Item = &'a Example> + Clone + 'a {
        self.source.iter().map(move |&i| &history[i])
    }
}

/// Features, labels and (optionally) stored logits of a set of examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub x: Matrix,
    pub labels: Vec<usize>,
    pub stored_logits: Option<Matrix>,
}

impl Batch {
    pub fn from_examples<'a, I>(examples: I, d: usize, with_logits: bool) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Example>,
        I::IntoIter: Clone,
    {
        let it = examples.into_iter();
        let x = features_of(it.clone(), d);
        let labels = it.clone().map(|e| e.label).collect();
        let stored_logits = if with_logits {
            let rows = it
                .map(|e| {
                    e.stored_logits
                        .as_deref()
                        .ok_or_else(|| Error::contract("replay example has no stored logits"))
                })
                .collect::<Result<Vec<_>>>()?;
            Some(if rows.is_empty() {
                Matrix::zeros(0, 0)
            } else {
                Matrix::from_rows(&rows)?
            })
        } else {
            None
        };
        Ok(Self {
            x,
            labels,
            stored_logits,
        })
    }

    pub fn empty(d: usize) -> Self {
        Self {
            x: Matrix::zeros(0, d),
            labels: Vec::new(),
            stored_logits: None,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Stores each example's current logits as its distillation target.
///
/// Examples that already carry logits keep them: targets are write-once.
pub fn record_task_logits(model: &ModelParams, task: &mut [Example]) -> Result<()> {
    let k = model.num_classes();
    if let Some(e) = task
        .iter()
        .find(|e| e.stored_logits.as_ref().is_some_and(|z| z.len() != k))
    {
        return Err(Error::contract(format!(
            "stored logits of length {} do not match a {k}-class model",
            e.stored_logits.as_ref().unwrap().len()
        )));
    }
    let pending: Vec<usize> = (0..task.len())
        .filter(|&i| task[i].stored_logits.is_none())
        .collect();
    if pending.is_empty() {
        return Ok(());
    }
    let x = features_of(pending.iter().map(|&i| &task[i]), model.input_dim());
    let trace = forward(model, &x)?;
    for (row, &i) in pending.iter().enumerate() {
        task[i].stored_logits = Some(trace.logits().row(row).to_vec());
    }
    Ok(())
}

/// `m_h` draws from history, without replacement unless `m_h` exceeds it.
pub fn replay_uniform(history_len: usize, m_h: usize, rng: &mut StreamRng) -> Result<ReplayBatch> {
    if history_len == 0 {
        return Err(Error::contract("replay from an empty history"));
    }
    let source = if m_h <= history_len {
        sample(rng, history_len, m_h).into_vec()
    } else {
        (0..m_h).map(|_| rng.random_range(0..history_len)).collect()
    };
    Ok(ReplayBatch { source })
}

fn candidate_subsample(history_len: usize, c: usize, rng: &mut StreamRng) -> Vec<usize> {
    let mut cands = sample(rng, history_len, c.min(history_len)).into_vec();
    cands.sort_unstable();
    cands
}

fn per_example_ce(model: &ModelParams, batch: &Batch) -> Result<Vec<f64>> {
    let probs = softmax_rows(forward(model, &batch.x)?.logits());
    Ok(probs
        .iter_rows()
        .zip(&batch.labels)
        .map(|(p, &y)| -p[y].max(PROB_EPS).ln())
        .collect())
}

/// Mean cross-entropy gradient of a batch.
fn ce_gradients(model: &ModelParams, batch: &Batch) -> Result<(f64, Gradients)> {
    let trace = forward(model, &batch.x)?;
    backward(
        model,
        &trace,
        &LossSpec::CrossEntropy,
        &Targets::labels(batch.labels.clone()),
    )
}

/// Maximally interfered retrieval.
///
/// Scores `c` uniformly drawn history candidates by how much their loss
/// grows after a virtual SGD step on `current` (post-step minus pre-step
/// loss) and keeps the `m_h` largest, ties to the smaller history index.
/// `model` is left untouched.
pub fn replay_mir(
    model: &ModelParams,
    history: &[Example],
    current: &Batch,
    cfg: &StrategyConfig,
    rng: &mut StreamRng,
) -> Result<ReplayBatch> {
    if history.is_empty() {
        return Err(Error::contract("replay from an empty history"));
    }
    let candidates = candidate_subsample(history.len(), cfg.c, rng);
    if cfg.m_h == 0 {
        return Ok(ReplayBatch { source: Vec::new() });
    }
    let (_, grads) = ce_gradients(model, current)?;
    let mut virtual_model = model.clone();
    for (layer, g) in virtual_model.layers_mut().iter_mut().zip(&grads.layers) {
        for (w, gw) in layer.weights.iter_mut().zip(&g.weights) {
            *w -= cfg.lr * gw;
        }
        for (b, gb) in layer.biases.iter_mut().zip(&g.biases) {
            *b -= cfg.lr * gb;
        }
    }
    let cand_batch = Batch::from_examples(
        candidates.iter().map(|&i| &history[i]),
        model.input_dim(),
        false,
    )?;
    let before = per_example_ce(model, &cand_batch)?;
    let after = per_example_ce(&virtual_model, &cand_batch)?;
    let scores: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    let source = select_top_b(&scores, cfg.m_h)?
        .into_iter()
        .map(|p| candidates[p])
        .collect();
    Ok(ReplayBatch { source })
}

/// Submodular replay: diverse and uncertain history samples.
///
/// Draws `c` candidates, embeds them with the current model's penultimate
/// layer, and greedily maximizes facility location plus
/// `lambda_com * ln(1 + sum entropy)` to pick `m_h` of them.
pub fn replay_sds2(
    model: &ModelParams,
    history: &[Example],
    cfg: &StrategyConfig,
    rng: &mut StreamRng,
) -> Result<ReplayBatch> {
    if history.is_empty() {
        return Err(Error::contract("replay from an empty history"));
    }
    let candidates = candidate_subsample(history.len(), cfg.c, rng);
    if cfg.m_h == 0 {
        return Ok(ReplayBatch { source: Vec::new() });
    }
    let x = features_of(candidates.iter().map(|&i| &history[i]), model.input_dim());
    let trace = forward(model, &x)?;
    let entropy: Vec<f64> = trace
        .probabilities()
        .iter_rows()
        .map(score_entropy)
        .collect();
    let inst = SubmodularInstance::from_embeddings(
        candidates,
        trace.penultimate(),
        entropy,
        cfg.sigma,
        cfg.lambda_com,
    )?;
    Ok(ReplayBatch {
        source: greedy_maximize(&inst, cfg.m_h)?.selected,
    })
}

/// Plasticity weight `|D_t| / (|D_t| + |D_{1:t-1}|)`.
pub fn lambda_schedule(size_current: usize, size_history: usize) -> Result<f64> {
    if size_current == 0 {
        return Err(Error::contract("current task is empty"));
    }
    Ok(size_current as f64 / (size_current + size_history) as f64)
}

fn joint_loss(
    model: &ModelParams,
    current: &Batch,
    replay: &Batch,
    spec: LossSpec,
) -> Result<(f64, Gradients)> {
    let x = current.x.vstack(&replay.x)?;
    let mut labels = current.labels.clone();
    labels.extend_from_slice(&replay.labels);
    let targets = match spec {
        LossSpec::CrossEntropy => Targets::labels(labels),
        _ => {
            let z = match &replay.stored_logits {
                Some(z) => z.clone(),
                None if replay.is_empty() => Matrix::zeros(0, model.num_classes()),
                None => return Err(Error::contract("replay batch has no stored logits")),
            };
            Targets::with_replay(labels, current.len(), z)
        }
    };
    let trace = forward(model, &x)?;
    let (loss, mut delta) = spec.evaluate(trace.logits(), &targets)?;
    let grads = backward_from_logit_grad(model, &trace, &mut delta)?;
    Ok((loss, grads))
}

/// Mean cross-entropy over the concatenated current and replay rows.
pub fn loss_interleaved(model: &ModelParams, current: &Batch, replay: &Batch) -> Result<(f64, Gradients)> {
    joint_loss(model, current, replay, LossSpec::CrossEntropy)
}

/// Dark-experience-replay objective and its gradients.
pub fn loss_der(
    model: &ModelParams,
    current: &Batch,
    replay: &Batch,
    alpha: f64,
    beta: f64,
) -> Result<(f64, Gradients)> {
    joint_loss(model, current, replay, LossSpec::Der { alpha, beta })
}

/// Scaled-distillation objective and its gradients.
pub fn loss_sd(
    model: &ModelParams,
    current: &Batch,
    replay: &Batch,
    alpha: f64,
    lambda_t: f64,
) -> Result<(f64, Gradients)> {
    joint_loss(model, current, replay, LossSpec::Sd { alpha, lambda: lambda_t })
}
