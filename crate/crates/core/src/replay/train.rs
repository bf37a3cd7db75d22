use rand::seq::SliceRandom;

use super::{
    lambda_schedule, loss_der, loss_interleaved, loss_sd, replay_mir, replay_sds2, replay_uniform,
    Batch, ReplayBatch, Strategy, StrategyConfig,
};
use crate::data::Example;
use crate::error::{Error, Result};
use crate::nn::{predict, ModelParams};
use crate::orchestrator::{check_converged, ConvergencePolicy};
use crate::rng::StreamRng;

/// Random streams consumed by one call to [`continual_train`].
pub struct TrainStreams<'a> {
    pub shuffle: &'a mut StreamRng,
    pub replay: &'a mut StreamRng,
}

/// What happened during one training call.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub epochs: usize,
    pub grad_steps: u64,
    /// Training accuracy on the current task after each epoch.
    pub metric_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_metric(&self) -> f64 {
        self.metric_history.last().copied().unwrap_or(0.0)
    }
}

fn accuracy_on(model: &ModelParams, examples: &[Example]) -> Result<f64> {
    let batch = Batch::from_examples(examples, model.input_dim(), false)?;
    let pred = predict(model, &batch.x)?;
    let hits = pred.iter().zip(&batch.labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / examples.len() as f64)
}

/// Trains `model` on `current` with replay from `history` until the
/// convergence policy fires.
///
/// Epochs are passes over `current` only. With an empty history (or
/// `m_h = 0`) no replay code runs and the trajectory is plain minibatch SGD.
pub fn continual_train(
    model: &mut ModelParams,
    current: &[Example],
    history: &[Example],
    cfg: &StrategyConfig,
    policy: &ConvergencePolicy,
    streams: TrainStreams<'_>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    policy.validate()?;
    if current.is_empty() {
        return Err(Error::contract("cannot train on an empty task"));
    }
    let d = model.input_dim();
    let sgd = cfg.sgd();
    let replay_on = !history.is_empty() && cfg.m_h > 0;
    let lambda_t = lambda_schedule(current.len(), history.len())?;
    let needs_logits = cfg.strategy.uses_stored_logits();

    let mut order: Vec<usize> = (0..current.len()).collect();
    let mut metric_history = Vec::new();
    let mut grad_steps = 0u64;
    loop {
        order.shuffle(streams.shuffle);
        for chunk in order.chunks(cfg.m) {
            let cur = Batch::from_examples(chunk.iter().map(|&i| &current[i]), d, false)?;
            let (_, grads) = if !replay_on {
                loss_interleaved(model, &cur, &Batch::empty(d))?
            } else {
                let picked: ReplayBatch = match cfg.strategy {
                    Strategy::Er | Strategy::Der | Strategy::Sd => {
                        replay_uniform(history.len(), cfg.m_h, streams.replay)?
                    }
                    Strategy::Mir => replay_mir(model, history, &cur, cfg, streams.replay)?,
                    Strategy::Sds2 => replay_sds2(model, history, cfg, streams.replay)?,
                };
                let rep = Batch::from_examples(picked.examples(history), d, needs_logits)?;
                match cfg.strategy {
                    Strategy::Er | Strategy::Mir => loss_interleaved(model, &cur, &rep)?,
                    Strategy::Der => loss_der(model, &cur, &rep, cfg.alpha, cfg.beta)?,
                    Strategy::Sd | Strategy::Sds2 => {
                        loss_sd(model, &cur, &rep, cfg.alpha, lambda_t)?
                    }
                }
            };
            model.sgd_step(&grads, &sgd)?;
            grad_steps += 1;
        }
        metric_history.push(accuracy_on(model, current)?);
        if check_converged(&metric_history, policy) {
            break;
        }
    }
    Ok(TrainOutcome {
        epochs: metric_history.len(),
        grad_steps,
        metric_history,
    })
}
