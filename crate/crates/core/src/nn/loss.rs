//! Softmax, the three training objectives and their logit gradients.

use super::Matrix;
use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logs.
pub const PROB_EPS: f64 = 1e-12;

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    out
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}

fn check_label(label: usize, k: usize) -> Result<()> {
    if label >= k {
        return Err(Error::Index(format!("label {label} not in [0, {k})")));
    }
    Ok(())
}

/// Mean negative log-likelihood of `labels` under the probability rows.
pub fn loss_cross_entropy(probs: &Matrix, labels: &[usize]) -> Result<f64> {
    if probs.rows() != labels.len() {
        return Err(Error::shape(format!(
            "{} probability rows for {} labels",
            probs.rows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::contract("cross-entropy of an empty batch"));
    }
    let mut total = 0.0;
    for (row, &y) in probs.iter_rows().zip(labels) {
        check_label(y, row.len())?;
        total -= row[y].max(PROB_EPS).ln();
    }
    Ok(total / labels.len() as f64)
}

fn kl_raw(teacher: &[f64], student: &[f64]) -> f64 {
    teacher
        .iter()
        .zip(student)
        .filter(|(&t, _)| t > 0.0)
        .map(|(&t, &s)| t * (t.ln() - s.max(PROB_EPS).ln()))
        .sum()
}

/// `KL(teacher || student)` with the student floored at [`PROB_EPS`].
pub fn loss_kl(teacher: &[f64], student: &[f64]) -> f64 {
    kl_raw(teacher, student).max(0.0)
}

/// Squared Euclidean distance between two logit vectors.
pub fn loss_mse_logits(g: &[f64], z_prime: &[f64]) -> Result<f64> {
    if g.len() != z_prime.len() {
        return Err(Error::shape(format!(
            "logit lengths differ: {} vs {}",
            g.len(),
            z_prime.len()
        )));
    }
    Ok(g.iter().zip(z_prime).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Which objective to minimize.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    /// Mean cross-entropy over every row of the batch.
    CrossEntropy,
    /// `L_c + mean_replay[alpha * |g - z'|^2 + beta * CE]`.
    Der { alpha: f64, beta: f64 },
    /// `lambda * L_c + (1 - lambda) * mean_replay[alpha * KL(softmax(z') || f) + (1 - alpha) * CE]`.
    Sd { alpha: f64, lambda: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::CrossEntropy => Ok(()),
            LossSpec::Der { alpha, beta } => {
                if !(alpha >= 0.0 && beta >= 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return Err(Error::contract(format!(
                        "der needs alpha, beta >= 0 (got {alpha}, {beta})"
                    )));
                }
                Ok(())
            }
            LossSpec::Sd { alpha, lambda } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::contract(format!("sd alpha {alpha} not in [0, 1]")));
                }
                if !(lambda > 0.0 && lambda <= 1.0) {
                    return Err(Error::contract(format!("sd lambda {lambda} not in (0, 1]")));
                }
                Ok(())
            }
        }
    }

    /// Loss value and its gradient with respect to the logits.
    pub fn evaluate(&self, logits: &Matrix, targets: &Targets) -> Result<(f64, Matrix)> {
        self.validate()?;
        let n = logits.rows();
        let k = logits.cols();
        if targets.labels.len() != n {
            return Err(Error::contract(format!(
                "{} labels for a batch of {n}",
                targets.labels.len()
            )));
        }
        for &y in &targets.labels {
            check_label(y, k)?;
        }
        let probs = softmax_rows(logits);
        let mut grad = Matrix::zeros(n, k);

        if let LossSpec::CrossEntropy = self {
            if n == 0 {
                return Err(Error::contract("empty batch"));
            }
            let scale = 1.0 / n as f64;
            let mut loss = 0.0;
            for r in 0..n {
                let y = targets.labels[r];
                loss -= probs.get(r, y).max(PROB_EPS).ln();
                ce_grad(probs.row(r), y, scale, grad.row_mut(r));
            }
            return Ok((loss * scale, grad));
        }

        let n_cur = targets.n_current;
        if n_cur == 0 || n_cur > n {
            return Err(Error::contract(format!(
                "current batch size {n_cur} invalid for batch of {n}"
            )));
        }
        let n_rep = n - n_cur;
        let stored = match (n_rep, &targets.stored_logits) {
            (0, _) => None,
            (_, Some(z)) if z.rows() == n_rep && z.cols() == k => Some(z),
            (_, Some(z)) => {
                return Err(Error::contract(format!(
                    "stored logits are {}x{}, replay rows need {n_rep}x{k}",
                    z.rows(),
                    z.cols()
                )))
            }
            (_, None) => {
                return Err(Error::contract("replay rows carry no stored logits"));
            }
        };

        let (cur_weight, ce_rep_weight, distill_weight) = match *self {
            LossSpec::Der { alpha, beta } => (1.0, beta, alpha),
            LossSpec::Sd { alpha, lambda } => {
                (lambda, (1.0 - lambda) * (1.0 - alpha), (1.0 - lambda) * alpha)
            }
            LossSpec::CrossEntropy => unreachable!(),
        };

        let cur_scale = cur_weight / n_cur as f64;
        let mut current = 0.0;
        for r in 0..n_cur {
            let y = targets.labels[r];
            current -= probs.get(r, y).max(PROB_EPS).ln();
            ce_grad(probs.row(r), y, cur_scale, grad.row_mut(r));
        }
        let mut loss = cur_weight * current / n_cur as f64;

        if let Some(z) = stored {
            let rep_scale = 1.0 / n_rep as f64;
            let mut ce_sum = 0.0;
            let mut distill_sum = 0.0;
            for j in 0..n_rep {
                let r = n_cur + j;
                let y = targets.labels[r];
                let p = probs.row(r);
                ce_sum -= p[y].max(PROB_EPS).ln();
                ce_grad(p, y, ce_rep_weight * rep_scale, grad.row_mut(r));
                let zr = z.row(j);
                match self {
                    LossSpec::Der { .. } => {
                        let g = logits.row(r);
                        let c = 2.0 * distill_weight * rep_scale;
                        let out = grad.row_mut(r);
                        for i in 0..k {
                            let diff = g[i] - zr[i];
                            distill_sum += diff * diff;
                            out[i] += c * diff;
                        }
                    }
                    LossSpec::Sd { .. } => {
                        let teacher = softmax(zr);
                        distill_sum += kl_raw(&teacher, p);
                        let c = distill_weight * rep_scale;
                        let out = grad.row_mut(r);
                        for i in 0..k {
                            out[i] += c * (p[i] - teacher[i]);
                        }
                    }
                    LossSpec::CrossEntropy => unreachable!(),
                }
            }
            loss += (distill_weight * distill_sum + ce_rep_weight * ce_sum) * rep_scale;
        }
        Ok((loss, grad))
    }
}

fn ce_grad(p: &[f64], y: usize, scale: f64, out: &mut [f64]) {
    for (i, (o, &pi)) in out.iter_mut().zip(p).enumerate() {
        let t = if i == y { 1.0 } else { 0.0 };
        *o += scale * (pi - t);
    }
}

/// Labels plus the bookkeeping needed by the replay objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub labels: Vec<usize>,
    /// Rows `[0, n_current)` are the current batch, the rest are replay rows.
    pub n_current: usize,
    /// Recorded logits `z'` of the replay rows, in order.
    pub stored_logits: Option<Matrix>,
}

impl Targets {
    pub fn labels(labels: Vec<usize>) -> Self {
        let n = labels.len();
        Self {
            labels,
            n_current: n,
            stored_logits: None,
        }
    }

    pub fn with_replay(labels: Vec<usize>, n_current: usize, stored_logits: Matrix) -> Self {
        Self {
            labels,
            n_current,
            stored_logits: Some(stored_logits),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softmax_closed_forms() {
        assert_eq!(softmax(&[0.0; 4]), vec![0.25; 4]);
        let p = softmax(&[0.0, 3f64.ln()]);
        assert_abs_diff_eq!(p[0], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.75, epsilon = 1e-12);
        let p = softmax(&[1000.0, 0.0]);
        assert!(p.iter().all(|v| v.is_finite()));
        assert_abs_diff_eq!(p[0], 1.0, epsilon = 1e-12);
        assert!(p[1] < 1e-300);
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let onehot = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(loss_cross_entropy(&onehot, &[0, 1]).unwrap(), 0.0);
        let uniform = Matrix::from_rows(&[[0.2; 5]]).unwrap();
        assert_abs_diff_eq!(
            loss_cross_entropy(&uniform, &[3]).unwrap(),
            5f64.ln(),
            epsilon = 1e-12
        );
        let half = Matrix::from_rows(&[[0.5, 0.5]]).unwrap();
        assert_abs_diff_eq!(
            loss_cross_entropy(&half, &[0]).unwrap(),
            2f64.ln(),
            epsilon = 1e-12
        );
        assert!(matches!(
            loss_cross_entropy(&half, &[2]),
            Err(Error::Index(_))
        ));
    }

    #[test]
    fn kl_closed_forms() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(loss_kl(&p, &p), 0.0);
        assert_abs_diff_eq!(loss_kl(&[1.0, 0.0], &[0.5, 0.5]), 2f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            loss_kl(&[0.75, 0.25], &[0.25, 0.75]),
            0.5 * 3f64.ln(),
            epsilon = 1e-12
        );
        // student zero is floored rather than producing infinity
        assert!(loss_kl(&[0.5, 0.5], &[1.0, 0.0]).is_finite());
    }

    #[test]
    fn mse_closed_forms() {
        assert_eq!(loss_mse_logits(&[1.5, 2.0], &[1.5, 2.0]).unwrap(), 0.0);
        assert_eq!(loss_mse_logits(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(loss_mse_logits(&[3.0, -1.0], &[1.0, 1.0]).unwrap(), 8.0);
        assert!(matches!(
            loss_mse_logits(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn coefficient_ranges_enforced() {
        assert!(LossSpec::Sd { alpha: 1.2, lambda: 0.5 }.validate().is_err());
        assert!(LossSpec::Sd { alpha: 0.5, lambda: 0.0 }.validate().is_err());
        assert!(LossSpec::Der { alpha: -0.1, beta: 1.0 }.validate().is_err());
        assert!(LossSpec::Sd { alpha: 0.0, lambda: 1.0 }.validate().is_ok());
    }

    #[test]
    fn replay_losses_need_stored_logits() {
        let logits = Matrix::from_rows(&[[0.1, 0.2], [0.3, 0.4]]).unwrap();
        let t = Targets {
            labels: vec![0, 1],
            n_current: 1,
            stored_logits: None,
        };
        assert!(matches!(
            LossSpec::Der { alpha: 0.1, beta: 1.0 }.evaluate(&logits, &t),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn der_with_zero_coefficients_is_current_cross_entropy() {
        let logits = Matrix::from_rows(&[[0.1, 0.2, 0.7], [0.3, -0.4, 0.0], [2.0, 1.0, 0.0]])
            .unwrap();
        let z = Matrix::from_rows(&[[5.0, 5.0, 5.0]]).unwrap();
        let t = Targets::with_replay(vec![2, 0, 1], 2, z);
        let (der, _) = LossSpec::Der { alpha: 0.0, beta: 0.0 }
            .evaluate(&logits, &t)
            .unwrap();
        let probs = softmax_rows(&logits);
        let cur = Matrix::from_rows(&[probs.row(0), probs.row(1)]).unwrap();
        assert_abs_diff_eq!(der, loss_cross_entropy(&cur, &[2, 0]).unwrap(), epsilon = 1e-15);
    }
}
