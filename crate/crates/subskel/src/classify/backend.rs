//! Multiclass back-ends for the distance-matrix classifiers.
//!
//! The primary back-end is a deterministic one-vs-rest L2-regularized
//! logistic regression trained by full-batch gradient descent with
//! backtracking line search from a zero initialization (no randomness).
//! A nearest-centroid back-end serves as a cheap baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LAMBDA: f64 = 1e-3;
const MAX_ITERS: usize = 500;
const GRAD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BackendModel {
    Linear(LinearOvr),
    Centroid(NearestCentroid),
}

impl BackendModel {
    pub fn predict(&self, row: &[f64]) -> String {
        match self {
            BackendModel::Linear(m) => m.predict(row),
            BackendModel::Centroid(m) => m.predict(row),
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            BackendModel::Linear(m) => &m.classes,
            BackendModel::Centroid(m) => &m.classes,
        }
    }
}

/// One-vs-rest logistic regression on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearOvr {
    pub classes: Vec<String>,
    /// Per class: feature weights followed by the bias.
    pub weights: Vec<Vec<f64>>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
}

impl LinearOvr {
    /// Fits one binary classifier per (sorted) class. Deterministic.
    pub fn fit(rows: &[Vec<f64>], labels: &[String]) -> Result<Self> {
        let (classes, dim) = check_training(rows, labels)?;
        let n = rows.len();

        let mut mean = vec![0.0; dim];
        for row in rows {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut std = vec![0.0; dim];
        for row in rows {
            for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n as f64).sqrt();
            if *s < 1e-12 {
                *s = 1.0;
            }
        }

        let x: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| standardized(row, &mean, &std))
            .collect();

        let mut weights = Vec::with_capacity(classes.len());
        for class in &classes {
            let y: Vec<f64> = labels
                .iter()
                .map(|l| if l == class { 1.0 } else { -1.0 })
                .collect();
            weights.push(fit_binary(&x, &y, dim));
        }
        Ok(Self {
            classes,
            weights,
            feature_mean: mean,
            feature_std: std,
        })
    }

    fn scores(&self, row: &[f64]) -> Vec<f64> {
        let x = standardized(row, &self.feature_mean, &self.feature_std);
        self.weights.iter().map(|w| dot_bias(w, &x)).collect()
    }

    /// Largest decision value wins; ties go to the lexicographically first
    /// class (classes are stored sorted).
    pub fn predict(&self, row: &[f64]) -> String {
        let scores = self.scores(row);
        let mut best = 0usize;
        for i in 1..scores.len() {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        self.classes[best].clone()
    }
}

fn standardized(row: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(mean)
        .zip(std)
        .map(|((v, m), s)| (v - m) / s)
        .collect()
}

fn dot_bias(w: &[f64], x: &[f64]) -> f64 {
    let d = x.len();
    let mut acc = w[d]; // bias
    for i in 0..d {
        acc += w[i] * x[i];
    }
    acc
}

/// Regularized logistic loss and gradient; the bias is unregularized.
fn loss_grad(x: &[Vec<f64>], y: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    let d = w.len() - 1;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (xi, yi) in x.iter().zip(y) {
        let z = yi * dot_bias(w, xi);
        // ln(1 + e^-z) computed stably.
        loss += if z > 0.0 {
            (-z).exp().ln_1p()
        } else {
            z.exp().ln_1p() - z
        };
        let sig = 1.0 / (1.0 + z.exp()); // σ(-z)
        let coeff = -yi * sig;
        for i in 0..d {
            grad[i] += coeff * xi[i];
        }
        grad[d] += coeff;
    }
    loss /= n as f64;
    for g in grad.iter_mut() {
        *g /= n as f64;
    }
    for i in 0..d {
        loss += 0.5 * LAMBDA * w[i] * w[i];
        grad[i] += LAMBDA * w[i];
    }
    (loss, grad)
}

fn fit_binary(x: &[Vec<f64>], y: &[f64], dim: usize) -> Vec<f64> {
    let mut w = vec![0.0; dim + 1];
    let (mut loss, mut grad) = loss_grad(x, y, &w);
    let mut step = 1.0;
    for _ in 0..MAX_ITERS {
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < GRAD_TOL {
            break;
        }
        // Backtracking line search on the Armijo condition.
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - step * gi).collect();
            let (trial_loss, trial_grad) = loss_grad(x, y, &trial);
            if trial_loss <= loss - 0.5 * step * gnorm2 {
                w = trial;
                loss = trial_loss;
                grad = trial_grad;
                step *= 1.5;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break; // step underflowed; we are at numerical convergence
        }
    }
    w
}

/// Per-class mean distance row; nearest centroid in Euclidean norm wins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestCentroid {
    pub classes: Vec<String>,
    pub centroids: Vec<Vec<f64>>,
}

impl NearestCentroid {
    pub fn fit(rows: &[Vec<f64>], labels: &[String]) -> Result<Self> {
        let (classes, dim) = check_training(rows, labels)?;
        let mut centroids = vec![vec![0.0; dim]; classes.len()];
        let mut counts = vec![0usize; classes.len()];
        for (row, label) in rows.iter().zip(labels) {
            let c = classes.binary_search(label).expect("label is a class");
            for (acc, v) in centroids[c].iter_mut().zip(row) {
                *acc += v;
            }
            counts[c] += 1;
        }
        for (centroid, count) in centroids.iter_mut().zip(&counts) {
            for v in centroid.iter_mut() {
                *v /= *count as f64;
            }
        }
        Ok(Self { classes, centroids })
    }

    /// Ties resolve to the lexicographically first class.
    pub fn predict(&self, row: &[f64]) -> String {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, centroid) in self.centroids.iter().enumerate() {
            let d: f64 = centroid
                .iter()
                .zip(row)
                .map(|(c, v)| (c - v) * (c - v))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        self.classes[best].clone()
    }
}

fn check_training(rows: &[Vec<f64>], labels: &[String]) -> Result<(Vec<String>, usize)> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::InvalidData("empty or mismatched training rows".into()));
    }
    let dim = rows[0].len();
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidData("ragged training rows".into()));
    }
    let mut classes: Vec<String> = labels.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidData(
            "distance-matrix training needs at least two classes".into(),
        ));
    }
    Ok((classes, dim))
}
