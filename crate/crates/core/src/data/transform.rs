use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Stratified, seeded train/val/test split.
///
/// Per class, `round(f_train * n_c)` examples go to train and
/// `round(f_val * n_c)` (capped by what is left) to val; the rest is test.
/// Each output keeps the original example order.
pub fn split(ds: &Dataset, fractions: (f64, f64, f64), seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::contract(format!("split fractions {fractions:?} out of range")));
    }
    if ((ft + fv + fs) - 1.0).abs() > 1e-9 {
        return Err(Error::contract(format!(
            "split fractions sum to {}, not 1",
            ft + fv + fs
        )));
    }
    let parts = [ft, fv, fs].iter().filter(|&&f| f > 0.0).count();
    let mut rng = seeded(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, e) in ds.examples().iter().enumerate() {
        by_class[e.label].push(i);
    }
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (class, mut members) in by_class.into_iter().enumerate() {
        let n = members.len();
        if n == 0 {
            continue;
        }
        if n < parts {
            return Err(Error::Stratification(format!(
                "class {class} has {n} examples for {parts} split parts"
            )));
        }
        members.shuffle(&mut rng);
        let n_train = ((ft * n as f64).round() as usize).min(n);
        let n_val = ((fv * n as f64).round() as usize).min(n - n_train);
        let n_val = if fs == 0.0 { n - n_train } else { n_val };
        train.extend_from_slice(&members[..n_train]);
        val.extend_from_slice(&members[n_train..n_train + n_val]);
        test.extend_from_slice(&members[n_train + n_val..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok((ds.subset(&train), ds.subset(&val), ds.subset(&test)))
}

/// Per-feature standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub const STD_FLOOR: f64 = 1e-8;

    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::contract("cannot normalize an empty dataset"));
        }
        let n = ds.len() as f64;
        let d = ds.dim();
        let mut mean = vec![0.0; d];
        for e in ds.examples() {
            for (m, x) in mean.iter_mut().zip(&e.features) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for e in ds.examples() {
            for ((v, x), m) in var.iter_mut().zip(&e.features).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let std = var
            .into_iter()
            .map(|v| (v / n).sqrt().max(Self::STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    /// Applies the stored statistics; not idempotent.
    pub fn apply(&self, ds: &Dataset) -> Dataset {
        let mut examples = ds.examples().to_vec();
        for e in &mut examples {
            for ((x, m), s) in e.features.iter_mut().zip(&self.mean).zip(&self.std) {
                *x = (*x - m) / s;
            }
        }
        Dataset::new(ds.name.clone(), examples, ds.dim(), ds.num_classes())
            .expect("normalization preserves shape")
    }
}

/// Standardizes `train` and returns the statistics for the other splits.
pub fn normalize(train: &Dataset) -> Result<(Dataset, NormStats)> {
    let stats = NormStats::fit(train)?;
    Ok((stats.apply(train), stats))
}

/// Feature-space corruptions for robustness evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corruption {
    GaussianNoise,
    FeatureDropout,
    ScaleShift,
    Quantize,
}

impl Corruption {
    pub const ALL: [Corruption; 4] = [
        Corruption::GaussianNoise,
        Corruption::FeatureDropout,
        Corruption::ScaleShift,
        Corruption::Quantize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Corruption::GaussianNoise => "gaussian_noise",
            Corruption::FeatureDropout => "feature_dropout",
            Corruption::ScaleShift => "scale_shift",
            Corruption::Quantize => "quantize",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::contract(format!("unknown corruption `{name}`")))
    }

    /// Severity knob: noise std, drop rate, scale factor, or quantization levels.
    pub fn magnitude(self, severity: u8) -> f64 {
        let s = f64::from(severity);
        match self {
            Corruption::GaussianNoise => 0.1 * s,
            Corruption::FeatureDropout => 0.1 * s,
            Corruption::ScaleShift => 1.0 + 0.2 * s,
            Corruption::Quantize => f64::from(1u32 << (7 - u32::from(severity))),
        }
    }
}

/// Returns a corrupted copy; labels and size are untouched.
pub fn corrupt(ds: &Dataset, kind: Corruption, severity: u8, seed: u64) -> Result<Dataset> {
    if !(1..=5).contains(&severity) {
        return Err(Error::contract(format!("severity {severity} not in 1..=5")));
    }
    let magnitude = kind.magnitude(severity);
    let mut rng = seeded(seed);
    let mut examples = ds.examples().to_vec();
    match kind {
        Corruption::GaussianNoise => {
            for e in &mut examples {
                for x in &mut e.features {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x += magnitude * z;
                }
            }
        }
        Corruption::FeatureDropout => {
            for e in &mut examples {
                for x in &mut e.features {
                    if rng.random::<f64>() < magnitude {
                        *x = 0.0;
                    }
                }
            }
        }
        Corruption::ScaleShift => {
            for e in &mut examples {
                e.features.iter_mut().for_each(|x| *x *= magnitude);
            }
        }
        Corruption::Quantize => {
            let steps = magnitude - 1.0;
            for j in 0..ds.dim() {
                let (lo, hi) = examples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
                    (lo.min(e.features[j]), hi.max(e.features[j]))
                });
                let range = hi - lo;
                if range <= 0.0 {
                    continue;
                }
                for e in &mut examples {
                    let x = &mut e.features[j];
                    *x = lo + ((*x - lo) / range * steps).round() / steps * range;
                }
            }
        }
    }
    Dataset::new(ds.name.clone(), examples, ds.dim(), ds.num_classes())
}
