//! Labeled examples, datasets and the labeled/unlabeled pool partition.

mod csv_io;
mod synth;
mod transform;

pub use csv_io::{load_csv, save_csv};
pub use synth::{gen_blobs, gen_drift_tasks};
pub use transform::{corrupt, normalize, split, Corruption, NormStats};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// One data point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: usize,
    /// Logits recorded when the example's task finished training.
    pub stored_logits: Option<Vec<f64>>,
    pub task_id: Option<usize>,
}

impl Example {
    pub fn new(features: Vec<f64>, label: usize) -> Self {
        Self {
            features,
            label,
            stored_logits: None,
            task_id: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    examples: Vec<Example>,
    d: usize,
    k: usize,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>, d: usize, k: usize) -> Result<Self> {
        for (i, ex) in examples.iter().enumerate() {
            if ex.features.len() != d {
                return Err(Error::Schema(format!(
                    "example {i} has {} features, expected {d}",
                    ex.features.len()
                )));
            }
            if ex.label >= k {
                return Err(Error::Index(format!(
                    "example {i} has label {} with only {k} classes",
                    ex.label
                )));
            }
            if let Some(z) = &ex.stored_logits {
                if z.len() != k || z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::contract(format!(
                        "example {i} carries malformed stored logits"
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            examples,
            d,
            k,
        })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize) -> &Example {
        &self.examples[i]
    }

    pub fn labels(&self) -> Vec<usize> {
        self.examples.iter().map(|e| e.label).collect()
    }

    /// Feature matrix of the whole dataset.
    pub fn features(&self) -> Matrix {
        features_of(self.examples.iter(), self.d)
    }

    /// Feature matrix of the selected rows, in the given order.
    pub fn features_at(&self, indices: &[usize]) -> Matrix {
        features_of(indices.iter().map(|&i| &self.examples[i]), self.d)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            d: self.d,
            k: self.k,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.k];
        for e in &self.examples {
            counts[e.label] += 1;
        }
        counts
    }

    /// Concatenates datasets with matching shape.
    pub fn concat(name: impl Into<String>, parts: &[Dataset]) -> Result<Dataset> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("nothing to concatenate"))?;
        let mut examples = Vec::new();
        for p in parts {
            if p.d != first.d || p.k != first.k {
                return Err(Error::Schema("datasets disagree on shape".into()));
            }
            examples.extend(p.examples.iter().cloned());
        }
        Dataset::new(name, examples, first.d, first.k)
    }
}

pub fn features_of<'a>(examples: impl Iterator<Item = &'a Example>, d: usize) -> Matrix {
    let mut data = Vec::new();
    let mut rows = 0;
    for e in examples {
        data.extend_from_slice(&e.features);
        rows += 1;
    }
    Matrix::from_vec(rows, d, data).expect("features have dataset width")
}

/// Partition of a base dataset into the unlabeled pool and ordered task sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolState {
    size: usize,
    unlabeled: BTreeSet<usize>,
    tasks: Vec<Vec<usize>>,
}

impl PoolState {
    /// Everything starts unlabeled.
    pub fn new(size: usize) -> Self {
        Self {
            size,
            unlabeled: (0..size).collect(),
            tasks: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Unlabeled indices in ascending order.
    pub fn unlabeled(&self) -> Vec<usize> {
        self.unlabeled.iter().copied().collect()
    }

    pub fn num_unlabeled(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn tasks(&self) -> &[Vec<usize>] {
        &self.tasks
    }

    pub fn num_labeled(&self) -> usize {
        self.tasks.iter().map(Vec::len).sum()
    }

    /// Every labeled index, task by task.
    pub fn labeled(&self) -> Vec<usize> {
        self.tasks.iter().flatten().copied().collect()
    }

    /// Moves `indices` out of the pool as a new task set.
    pub fn label(&mut self, indices: &[usize]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &i in indices {
            if !self.unlabeled.contains(&i) || !seen.insert(i) {
                return Err(Error::contract(format!(
                    "index {i} is not available for labeling"
                )));
            }
        }
        for &i in indices {
            self.unlabeled.remove(&i);
        }
        self.tasks.push(indices.to_vec());
        Ok(())
    }

    /// Checks that unlabeled and labeled sets partition `0..size`.
    pub fn validate(&self) -> Result<()> {
        let mut seen = vec![false; self.size];
        for &i in self.unlabeled.iter().chain(self.tasks.iter().flatten()) {
            if i >= self.size || seen[i] {
                return Err(Error::contract(format!("index {i} duplicated or out of range")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::contract("pool partition is not exhaustive"));
        }
        Ok(())
    }
}
