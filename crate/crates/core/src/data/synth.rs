//! Synthetic Gaussian-cluster datasets.

use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Example};
use crate::error::{Error, Result};
use crate::rng::{seeded, StreamRng};

fn unit_vector(rng: &mut StreamRng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `k` class means on the unit sphere.
///
/// Draws `64 k` uniform candidates and keeps a farthest-point subset so
/// clusters do not collide by chance.
fn sphere_means(rng: &mut StreamRng, k: usize, d: usize) -> Vec<Vec<f64>> {
    let candidates: Vec<Vec<f64>> = (0..64 * k).map(|_| unit_vector(rng, d)).collect();
    let mut chosen = vec![0usize];
    let mut nearest: Vec<f64> = candidates
        .iter()
        .map(|c| sq_dist(c, &candidates[0]))
        .collect();
    while chosen.len() < k {
        let mut best = 0;
        for (i, &dist) in nearest.iter().enumerate() {
            if dist > nearest[best] {
                best = i;
            }
        }
        chosen.push(best);
        for (i, c) in candidates.iter().enumerate() {
            nearest[i] = nearest[i].min(sq_dist(c, &candidates[best]));
        }
    }
    chosen.into_iter().map(|i| candidates[i].clone()).collect()
}

fn sample_around(rng: &mut StreamRng, mean: &[f64], spread: f64) -> Vec<f64> {
    mean.iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            m + spread * z
        })
        .collect()
}

fn check_common(k: usize, d: usize, spread: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::contract(format!("need at least 2 classes, got {k}")));
    }
    if d < 2 {
        return Err(Error::contract(format!("need at least 2 dimensions, got {d}")));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::contract(format!("spread {spread} must be nonnegative")));
    }
    Ok(())
}

/// Isotropic Gaussian blobs, one per class, examples grouped by class.
pub fn gen_blobs(k: usize, n_per_class: usize, d: usize, spread: f64, seed: u64) -> Result<Dataset> {
    check_common(k, d, spread)?;
    let mut rng = seeded(seed);
    let means = sphere_means(&mut rng, k, d);
    let mut examples = Vec::with_capacity(k * n_per_class);
    for (label, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            examples.push(Example::new(sample_around(&mut rng, mean, spread), label));
        }
    }
    Dataset::new(format!("blobs-k{k}-d{d}-s{seed}"), examples, d, k)
}

/// A sequence of blob tasks whose distribution moves from task to task.
///
/// Task `t` (0-based) uses the base means rotated by `t * drift * 15` degrees
/// in the plane of the first two coordinates, then translated by
/// `t * drift` along a fixed random unit direction. Labels cycle through
/// the classes so every task is balanced.
pub fn gen_drift_tasks(
    k: usize,
    n_per_task: usize,
    d: usize,
    n_tasks: usize,
    drift: f64,
    spread: f64,
    seed: u64,
) -> Result<Vec<Dataset>> {
    check_common(k, d, spread)?;
    if n_tasks < 2 {
        return Err(Error::contract(format!("need at least 2 tasks, got {n_tasks}")));
    }
    if !(drift >= 0.0 && drift.is_finite()) {
        return Err(Error::contract(format!("drift {drift} must be nonnegative")));
    }
    let mut rng = seeded(seed);
    let base = sphere_means(&mut rng, k, d);
    let direction = unit_vector(&mut rng, d);
    let mut tasks = Vec::with_capacity(n_tasks);
    for t in 0..n_tasks {
        let angle = (t as f64 * drift * 15.0).to_radians();
        let (sin, cos) = angle.sin_cos();
        let shift = t as f64 * drift;
        let means: Vec<Vec<f64>> = base
            .iter()
            .map(|m| {
                let mut v = m.clone();
                v[0] = cos * m[0] - sin * m[1];
                v[1] = sin * m[0] + cos * m[1];
                v.iter_mut()
                    .zip(&direction)
                    .for_each(|(x, u)| *x += shift * u);
                v
            })
            .collect();
        let examples = (0..n_per_task)
            .map(|i| {
                let label = i % k;
                let mut ex = Example::new(sample_around(&mut rng, &means[label], spread), label);
                ex.task_id = Some(t);
                ex
            })
            .collect();
        tasks.push(Dataset::new(format!("drift-task{t}-s{seed}"), examples, d, k)?);
    }
    Ok(tasks)
}
