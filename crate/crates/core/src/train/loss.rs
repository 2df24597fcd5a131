//! Time-to-first-spike loss and the linear readout.

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::model::Matrix;

/// `L = log sum_n exp((t_label - t_n) / xi)` and `dL/dt`.
pub fn ttfs_loss(output_times: &[f64], label: usize, xi: f64) -> (f64, Vec<f64>) {
    let t_label = output_times[label];
    let a: Vec<f64> = output_times.iter().map(|&t| (t_label - t) / xi).collect();
    let m = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = a.iter().map(|&x| (x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    let loss = if m == 0.0 {
        // the label term is the largest; keep precision when the rest is tiny
        let rest: f64 = e.iter().enumerate().filter(|&(n, _)| n != label).map(|(_, x)| x).sum();
        rest.ln_1p()
    } else {
        m + z.ln()
    };
    let mut grad: Vec<f64> = e.iter().map(|&x| -x / z / xi).collect();
    grad[label] = (1.0 - e[label] / z) / xi;
    (loss, grad)
}

/// Index of the earliest spike; ties go to the lowest index.
pub fn earliest(times: &[f64]) -> usize {
    let mut best = 0;
    for (i, &t) in times.iter().enumerate() {
        if t < times[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Affine readout `logits = A t + b` of hidden spike times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Head gradients plus `dL/dt` of the hidden times.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadGradient {
    pub loss: f64,
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub hidden: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(classes: usize, hidden: usize) -> Self {
        Self {
            weights: Matrix::zeros(classes, hidden),
            bias: vec![0.0; classes],
        }
    }

    /// Weights uniform in `+-1/sqrt(hidden)`, zero bias.
    pub fn init<R: rand::Rng + ?Sized>(classes: usize, hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut head = Self::zeros(classes, hidden);
        for w in head.weights.as_mut_slice() {
            *w = rng.random_range(-bound..bound);
        }
        head
    }

    pub fn classes(&self) -> usize {
        self.weights.rows()
    }

    pub fn logits(&self, hidden: &[f64]) -> Result<Vec<f64>> {
        if hidden.len() != self.weights.cols() {
            return dim_err(format!(
                "head expects {} hidden times, got {}",
                self.weights.cols(),
                hidden.len()
            ));
        }
        Ok((0..self.classes())
            .map(|c| {
                self.bias[c]
                    + self
                        .weights
                        .row(c)
                        .iter()
                        .zip(hidden)
                        .map(|(a, t)| a * t)
                        .sum::<f64>()
            })
            .collect())
    }

    /// Softmax cross-entropy of the logits and its exact gradient.
    pub fn loss_and_grad(&self, hidden: &[f64], label: usize) -> Result<HeadGradient> {
        let logits = self.logits(hidden)?;
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|&x| (x - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let loss = m + z.ln() - logits[label];
        let delta: Vec<f64> = e
            .iter()
            .enumerate()
            .map(|(c, &x)| x / z - f64::from(u8::from(c == label)))
            .collect();
        let mut weights = Matrix::zeros(self.classes(), hidden.len());
        let mut grad_hidden = vec![0.0; hidden.len()];
        for (c, &d) in delta.iter().enumerate() {
            let arow = self.weights.row(c);
            for (j, gw) in weights.row_mut(c).iter_mut().enumerate() {
                *gw = d * hidden[j];
                grad_hidden[j] += d * arow[j];
            }
        }
        Ok(HeadGradient {
            loss,
            weights,
            bias: delta,
            hidden: grad_hidden,
        })
    }
}

/// Hidden times as seen by the head: silent neurons read `t_clamp`.
pub fn clamp_hidden(times: &[f64], t_inf: f64, t_clamp: f64) -> Vec<f64> {
    times
        .iter()
        .map(|&t| if t < t_inf { t } else { t_clamp })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_outputs() {
        let (l, g) = ttfs_loss(&[1.0, 1.0, 1.0], 0, 0.1);
        assert!((l - 3f64.ln()).abs() < 1e-12);
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn confident_output() {
        let (l, _) = ttfs_loss(&[0.0, 5.0, 5.0], 0, 0.1);
        assert!(l > 0.0 && l < 1e-20);
        // silent label: stable, large loss
        let (l, g) = ttfs_loss(&[500.0, 1.0, 2.0], 0, 0.1);
        assert!(l.is_finite() && l > 4000.0);
        assert!(g.iter().all(|x| x.is_finite()));
    }

    #[test]
    fn finite_difference() {
        let t = [0.3, 0.45, 0.38];
        let xi = 0.1;
        let (_, g) = ttfs_loss(&t, 2, xi);
        let h = 1e-6;
        for n in 0..3 {
            let mut a = t;
            let mut b = t;
            a[n] += h;
            b[n] -= h;
            let fd = (ttfs_loss(&a, 2, xi).0 - ttfs_loss(&b, 2, xi).0) / (2.0 * h);
            assert!((fd - g[n]).abs() <= 1e-6 * fd.abs().max(g[n].abs()), "{n}");
        }
    }

    #[test]
    fn head_zero_and_saturated() {
        let h = LinearHead::zeros(3, 2);
        let g = h.loss_and_grad(&[0.2, 0.4], 1).unwrap();
        assert!((g.loss - 3f64.ln()).abs() < 1e-12);
        let mut h = LinearHead::zeros(3, 2);
        h.bias = vec![0.0, 20.0, 0.0];
        assert!(h.loss_and_grad(&[0.2, 0.4], 1).unwrap().loss < 1e-3);
    }

    #[test]
    fn predictions_break_ties_low() {
        assert_eq!(earliest(&[1.0, 0.5, 0.5]), 1);
        assert_eq!(earliest(&[500.0, 500.0]), 0);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
    }
}
