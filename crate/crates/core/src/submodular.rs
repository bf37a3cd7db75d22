//! Facility location plus concave-over-modular objective, and its greedy
//! and exhaustive maximizers.
//!
//! ```text
//! G(S) = sum_{i in A} max_{j in S} w_ij + lambda * ln(1 + sum_{i in S} h_i)
//! ```
//!
//! with `max` over the empty set taken as 0, so `G(empty) = 0`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::nn::Matrix;

/// Gains closer than this are treated as equal and the smaller position wins.
pub const GAIN_TOL: f64 = 1e-12;

/// Largest number of subsets the exhaustive maximizer will enumerate.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// RBF similarity `exp(-|a - b|^2 / (2 sigma^2))`.
pub fn similarity_rbf(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::contract(format!("rbf sigma {sigma} must be positive")));
    }
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "embedding lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-sq / (2.0 * sigma * sigma)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularInstance {
    ground: Vec<usize>,
    /// Row-major `n x n`.
    similarity: Vec<f64>,
    uncertainty: Vec<f64>,
    com_weight: f64,
}

impl SubmodularInstance {
    pub fn new(
        ground: Vec<usize>,
        similarity: Matrix,
        uncertainty: Vec<f64>,
        com_weight: f64,
    ) -> Result<Self> {
        let n = ground.len();
        if similarity.rows() != n || similarity.cols() != n || uncertainty.len() != n {
            return Err(Error::shape(format!(
                "ground of {n} needs a {n}x{n} similarity and {n} scores"
            )));
        }
        if !(com_weight >= 0.0 && com_weight.is_finite()) {
            return Err(Error::contract(format!("lambda {com_weight} must be >= 0")));
        }
        if uncertainty.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return Err(Error::contract("uncertainty scores must be finite and >= 0"));
        }
        let mut sorted = ground.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::contract("ground set has duplicate ids"));
        }
        for i in 0..n {
            if similarity.get(i, i) != 1.0 {
                return Err(Error::contract(format!("self-similarity of {i} is not 1")));
            }
            for j in 0..i {
                let w = similarity.get(i, j);
                if w != similarity.get(j, i) || !(0.0..=1.0).contains(&w) {
                    return Err(Error::contract(format!(
                        "similarity ({i}, {j}) is asymmetric or outside [0, 1]"
                    )));
                }
            }
        }
        Ok(Self {
            ground,
            similarity: similarity.into_vec(),
            uncertainty,
            com_weight,
        })
    }

    /// Builds `W` from embedding rows with the RBF kernel.
    pub fn from_embeddings(
        ground: Vec<usize>,
        embeddings: &Matrix,
        uncertainty: Vec<f64>,
        sigma: f64,
        com_weight: f64,
    ) -> Result<Self> {
        let n = embeddings.rows();
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            w.row_mut(i)[i] = 1.0;
            for j in 0..i {
                let s = similarity_rbf(embeddings.row(i), embeddings.row(j), sigma)?;
                w.row_mut(i)[j] = s;
                w.row_mut(j)[i] = s;
            }
        }
        Self::new(ground, w, uncertainty, com_weight)
    }

    pub fn ground(&self) -> &[usize] {
        &self.ground
    }

    pub fn len(&self) -> usize {
        self.ground.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ground.is_empty()
    }

    #[inline]
    fn w(&self, i: usize, j: usize) -> f64 {
        self.similarity[i * self.ground.len() + j]
    }

    fn positions(&self, set: &[usize]) -> Result<Vec<usize>> {
        set.iter()
            .map(|id| {
                self.ground
                    .iter()
                    .position(|g| g == id)
                    .ok_or_else(|| Error::contract(format!("{id} is not in the ground set")))
            })
            .collect()
    }

    fn value_at(&self, positions: &[usize]) -> f64 {
        let n = self.ground.len();
        let mut fl = 0.0;
        if !positions.is_empty() {
            for i in 0..n {
                fl += positions
                    .iter()
                    .map(|&j| self.w(i, j))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
        }
        let h: f64 = positions.iter().map(|&j| self.uncertainty[j]).sum();
        fl + self.com_weight * h.ln_1p()
    }

    fn empty_state(&self) -> GreedyState {
        GreedyState {
            cover: vec![0.0; self.ground.len()],
            h_sum: 0.0,
        }
    }

    /// Marginal gain of adding position `j`.
    fn gain(&self, state: &GreedyState, j: usize) -> f64 {
        let mut fl = 0.0;
        for (i, &c) in state.cover.iter().enumerate() {
            let w = self.w(i, j);
            if w > c {
                fl += w - c;
            }
        }
        let com = self.com_weight
            * ((state.h_sum + self.uncertainty[j]).ln_1p() - state.h_sum.ln_1p());
        fl + com
    }

    fn insert(&self, state: &mut GreedyState, j: usize) {
        for (i, c) in state.cover.iter_mut().enumerate() {
            *c = c.max(self.w(i, j));
        }
        state.h_sum += self.uncertainty[j];
    }
}

struct GreedyState {
    cover: Vec<f64>,
    h_sum: f64,
}

/// `G(S)` for a set of ground ids.
pub fn eval_objective(inst: &SubmodularInstance, set: &[usize]) -> Result<f64> {
    let pos = inst.positions(set)?;
    Ok(inst.value_at(&pos))
}

/// Ground ids in pick order and the marginal gain of each pick.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyResult {
    pub selected: Vec<usize>,
    pub gains: Vec<f64>,
}

impl GreedyResult {
    pub fn value(&self) -> f64 {
        self.gains.iter().sum()
    }
}

fn check_greedy_args(inst: &SubmodularInstance, k: usize) -> Result<()> {
    if inst.is_empty() {
        return Err(Error::contract("empty ground set"));
    }
    if k == 0 {
        return Err(Error::contract("cardinality must be at least 1"));
    }
    Ok(())
}

/// Greedy by full re-evaluation of every gain each round.
pub fn greedy_maximize_naive(inst: &SubmodularInstance, k: usize) -> Result<GreedyResult> {
    check_greedy_args(inst, k)?;
    let n = inst.len();
    let mut state = inst.empty_state();
    let mut taken = vec![false; n];
    let mut result = GreedyResult {
        selected: Vec::new(),
        gains: Vec::new(),
    };
    for _ in 0..k.min(n) {
        let gains: Vec<(usize, f64)> = (0..n)
            .filter(|&j| !taken[j])
            .map(|j| (j, inst.gain(&state, j)))
            .collect();
        let best = gains.iter().map(|g| g.1).fold(f64::NEG_INFINITY, f64::max);
        let (pick, gain) = *gains
            .iter()
            .find(|g| g.1 >= best - GAIN_TOL)
            .expect("nonempty candidates");
        taken[pick] = true;
        inst.insert(&mut state, pick);
        result.selected.push(inst.ground[pick]);
        result.gains.push(gain);
    }
    Ok(result)
}

#[derive(Debug)]
struct Bound {
    gain: f64,
    pos: usize,
    round: usize,
}

impl PartialEq for Bound {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Bound {}

impl PartialOrd for Bound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Bound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gain
            .total_cmp(&other.gain)
            .then_with(|| other.pos.cmp(&self.pos))
    }
}

/// Lazy (priority-queue) greedy. Returns exactly what
/// [`greedy_maximize_naive`] returns, including tie resolution.
pub fn greedy_maximize(inst: &SubmodularInstance, k: usize) -> Result<GreedyResult> {
    check_greedy_args(inst, k)?;
    let n = inst.len();
    let mut state = inst.empty_state();
    let mut heap: BinaryHeap<Bound> = (0..n)
        .map(|pos| Bound {
            gain: inst.gain(&state, pos),
            pos,
            round: 0,
        })
        .collect();
    let mut result = GreedyResult {
        selected: Vec::new(),
        gains: Vec::new(),
    };
    for round in 0..k.min(n) {
        // Refresh until the best bound is current; it is then the true max.
        loop {
            let top = heap.peek().expect("candidates remain");
            if top.round == round {
                break;
            }
            let mut top = heap.pop().unwrap();
            top.gain = inst.gain(&state, top.pos);
            top.round = round;
            heap.push(top);
        }
        let leader = heap.peek().unwrap().gain;
        // Anything that might tie with the leader must be refreshed too.
        let mut contenders = Vec::new();
        while heap
            .peek()
            .is_some_and(|b| b.gain >= leader - 2.0 * GAIN_TOL)
        {
            let mut b = heap.pop().unwrap();
            if b.round != round {
                b.gain = inst.gain(&state, b.pos);
                b.round = round;
            }
            contenders.push(b);
        }
        let best = contenders
            .iter()
            .map(|b| b.gain)
            .fold(f64::NEG_INFINITY, f64::max);
        let winner = contenders
            .iter()
            .filter(|b| b.gain >= best - GAIN_TOL)
            .min_by_key(|b| b.pos)
            .map(|b| b.pos)
            .unwrap();
        for b in contenders {
            if b.pos == winner {
                inst.insert(&mut state, b.pos);
                result.selected.push(inst.ground[b.pos]);
                result.gains.push(b.gain);
            } else {
                heap.push(b);
            }
        }
    }
    Ok(result)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > BRUTE_FORCE_LIMIT * 1000 {
            return acc;
        }
    }
    acc
}

/// Exact maximizer by enumeration; ties go to the lexicographically
/// smallest position set.
pub fn brute_force_maximize(inst: &SubmodularInstance, k: usize) -> Result<(Vec<usize>, f64)> {
    check_greedy_args(inst, k)?;
    let n = inst.len();
    if k > n {
        return Err(Error::contract(format!("k = {k} exceeds ground size {n}")));
    }
    let count = binomial(n, k);
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::Size(format!("C({n}, {k}) = {count} subsets")));
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for combo in (0..n).combinations(k) {
        let v = inst.value_at(&combo);
        if best.as_ref().is_none_or(|(_, bv)| v > bv + GAIN_TOL) {
            best = Some((combo, v));
        }
    }
    let (pos, value) = best.expect("at least one subset");
    Ok((pos.into_iter().map(|p| inst.ground[p]).collect(), value))
}
