use cal_core::nn::Matrix;
use cal_core::rng::seeded;
use cal_core::submodular::SubmodularInstance;
use itertools::Itertools;
use rand::Rng;

pub struct Raw {
    pub w: Vec<Vec<f64>>,
    pub h: Vec<f64>,
    pub lambda: f64,
}

/// Independent evaluation of the facility-location plus log-uncertainty objective.
pub fn objective(raw: &Raw, set: &[usize]) -> f64 {
    if set.is_empty() {
        return 0.0;
    }
    let cover: f64 = raw
        .w
        .iter()
        .map(|row| set.iter().map(|&j| row[j]).fold(0.0, f64::max))
        .sum();
    let h: f64 = set.iter().map(|&j| raw.h[j]).sum();
    cover + raw.lambda * (1.0 + h).ln()
}

pub fn random_instance(seed: u64, n: usize) -> (SubmodularInstance, Raw) {
    let mut rng = seeded(seed);
    let d = 3;
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let sigma = rng.random_range(0.3..2.0);
    let w: Vec<Vec<f64>> = pts
        .iter()
        .map(|a| {
            pts.iter()
                .map(|b| {
                    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                    (-sq / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect();
    let h: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..(8f64).ln())).collect();
    let lambda = rng.random_range(0.0..3.0);
    let emb = Matrix::from_vec(n, d, pts.concat()).unwrap();
    let inst = SubmodularInstance::from_embeddings((0..n).collect(), &emb, h.clone(), sigma, lambda).unwrap();
    (inst, Raw { w, h, lambda })
}

pub fn exhaustive_optimum(raw: &Raw, k: usize) -> f64 {
    (0..raw.h.len())
        .combinations(k)
        .map(|s| objective(raw, &s))
        .fold(f64::NEG_INFINITY, f64::max)
}
