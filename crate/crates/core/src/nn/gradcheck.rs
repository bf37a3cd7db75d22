use rand_distr::{Distribution, StandardNormal};

use super::{forward, loss_and_gradients, LossSpec, Matrix, ModelParams, Targets};
use crate::error::Result;
use crate::rng::seeded;

/// Loss of `model` on `(x, targets)` without computing gradients.
pub fn loss_value(model: &ModelParams, x: &Matrix, spec: &LossSpec, targets: &Targets) -> Result<f64> {
    let trace = forward(model, x)?;
    spec.evaluate(trace.logits(), targets).map(|(l, _)| l)
}

/// Largest relative disagreement between backprop and central differences.
///
/// Per parameter: `|analytic - fd| / max(1e-8, |analytic| + |fd|)`.
pub fn grad_check(
    model: &ModelParams,
    x: &Matrix,
    spec: &LossSpec,
    targets: &Targets,
    fd_step: f64,
) -> Result<f64> {
    let (_, grads) = loss_and_gradients(model, x, spec, targets)?;
    let analytic = grads.flatten();
    let mut probe = model.clone();
    let mut worst = 0.0f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = *probe.param_mut(i);
        *probe.param_mut(i) = orig + fd_step;
        let plus = loss_value(&probe, x, spec, targets)?;
        *probe.param_mut(i) = orig - fd_step;
        let minus = loss_value(&probe, x, spec, targets)?;
        *probe.param_mut(i) = orig;
        let fd = (plus - minus) / (2.0 * fd_step);
        let rel = (a - fd).abs() / (a.abs() + fd.abs()).max(1e-8);
        worst = worst.max(rel);
    }
    Ok(worst)
}

/// Finite-difference step used by [`standard_gradcheck`].
pub const GRADCHECK_STEP: f64 = 1e-5;

/// Checks every loss on a random 2-16-16-4 model with a batch of 8.
///
/// The replay losses treat the last 4 rows as replay rows with random
/// stored logits. Returns `(loss name, max relative error)` pairs.
pub fn standard_gradcheck(seed: u64) -> Result<Vec<(&'static str, f64)>> {
    let mut rng = seeded(seed);
    let model = ModelParams::init(&[2, 16, 16, 4], &mut rng)?;
    let mut normal = |n: usize, scale: f64| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                scale * v
            })
            .collect()
    };
    let x = Matrix::from_vec(8, 2, normal(16, 1.0))?;
    let z = Matrix::from_vec(4, 4, normal(16, 2.0))?;
    let labels: Vec<usize> = (0..8).map(|i| (i * 3 + seed as usize) % 4).collect();
    let cases = [
        ("cross_entropy", LossSpec::CrossEntropy, Targets::labels(labels.clone())),
        (
            "der",
            LossSpec::Der { alpha: 0.1, beta: 1.0 },
            Targets::with_replay(labels.clone(), 4, z.clone()),
        ),
        (
            "sd",
            LossSpec::Sd { alpha: 0.25, lambda: 0.5 },
            Targets::with_replay(labels, 4, z),
        ),
    ];
    cases
        .into_iter()
        .map(|(name, spec, targets)| Ok((name, grad_check(&model, &x, &spec, &targets, GRADCHECK_STEP)?)))
        .collect()
}
