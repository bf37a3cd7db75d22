//! Acquisition: scoring the unlabeled pool and picking the next batch.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{forward, softmax_rows, ModelParams};
use crate::rng::StreamRng;
use crate::submodular::{greedy_maximize, SubmodularInstance};

/// Selection policy for a query round.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum AcquisitionChoice {
    Random,
    #[default]
    Entropy,
    Margin,
    /// Entropy prefilter to `ceil(c * b)` candidates, then facility location.
    Fass {
        c: f64,
        #[serde(default = "default_fass_sigma")]
        sigma: f64,
    },
}

fn default_fass_sigma() -> f64 {
    1.0
}

impl AcquisitionChoice {
    pub fn name(&self) -> &'static str {
        match self {
            AcquisitionChoice::Random => "random",
            AcquisitionChoice::Entropy => "entropy",
            AcquisitionChoice::Margin => "margin",
            AcquisitionChoice::Fass { .. } => "fass",
        }
    }
}

/// Shannon entropy in nats, `0 ln 0 = 0`.
pub fn score_entropy(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// `1 - (p_top1 - p_top2)`; larger means less certain.
pub fn score_margin(probs: &[f64]) -> f64 {
    let (mut first, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for &p in probs {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    1.0 - (first - second)
}

/// Positions of the `b` largest scores, best first; ties go to the smaller position.
pub fn select_top_b(scores: &[f64], b: usize) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::contract("cannot select from an empty pool"));
    }
    if b == 0 {
        return Err(Error::contract("batch size must be at least 1"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &c| scores[c].total_cmp(&scores[a]).then(a.cmp(&c)));
    order.truncate(b);
    Ok(order)
}

/// `min(b, |pool|)` pool members uniformly without replacement.
pub fn select_random(pool: &[usize], b: usize, rng: &mut StreamRng) -> Vec<usize> {
    let b = b.min(pool.len());
    sample(rng, pool.len(), b)
        .into_iter()
        .map(|i| pool[i])
        .collect()
}

/// Per-row class probabilities for the listed examples.
fn pool_probabilities(model: &ModelParams, ds: &Dataset, pool: &[usize]) -> Result<crate::nn::Matrix> {
    let trace = forward(model, &ds.features_at(pool))?;
    Ok(softmax_rows(trace.logits()))
}

pub fn entropy_scores(model: &ModelParams, ds: &Dataset, indices: &[usize]) -> Result<Vec<f64>> {
    let probs = pool_probabilities(model, ds, indices)?;
    Ok(probs.iter_rows().map(score_entropy).collect())
}

/// Two-stage selection: entropy prefilter, then facility location on
/// penultimate embeddings with an RBF kernel.
pub fn select_fass(
    model: &ModelParams,
    ds: &Dataset,
    pool: &[usize],
    b: usize,
    c: f64,
    sigma: f64,
) -> Result<Vec<usize>> {
    if !(c >= 1.0 && c.is_finite()) {
        return Err(Error::contract(format!("fass multiplier {c} must be >= 1")));
    }
    let scores = entropy_scores(model, ds, pool)?;
    let stage_one = ((c * b as f64).ceil() as usize).min(pool.len());
    let candidates: Vec<usize> = select_top_b(&scores, stage_one)?
        .into_iter()
        .map(|p| pool[p])
        .collect();
    let trace = forward(model, &ds.features_at(&candidates))?;
    let n = candidates.len();
    let inst = SubmodularInstance::from_embeddings(
        candidates,
        trace.penultimate(),
        vec![0.0; n],
        sigma,
        0.0,
    )?;
    Ok(greedy_maximize(&inst, b)?.selected)
}

/// Picks the next `b` pool members under `choice`.
pub fn select(
    choice: &AcquisitionChoice,
    model: &ModelParams,
    ds: &Dataset,
    pool: &[usize],
    b: usize,
    rng: &mut StreamRng,
) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::contract("cannot select from an empty pool"));
    }
    match *choice {
        AcquisitionChoice::Random => Ok(select_random(pool, b, rng)),
        AcquisitionChoice::Entropy | AcquisitionChoice::Margin => {
            let probs = pool_probabilities(model, ds, pool)?;
            let score = if matches!(choice, AcquisitionChoice::Entropy) {
                score_entropy
            } else {
                score_margin
            };
            let scores: Vec<f64> = probs.iter_rows().map(score).collect();
            Ok(select_top_b(&scores, b)?
                .into_iter()
                .map(|p| pool[p])
                .collect())
        }
        AcquisitionChoice::Fass { c, sigma } => select_fass(model, ds, pool, b, c, sigma),
    }
}
