use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Standardizer};
use crate::error::{Error, Result};

/// Weight vector with the bias first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    pub theta: Vec<f64>,
}

impl LogisticParams {
    pub fn probability(&self, z: &[f64]) -> f64 {
        sigmoid(linear(&self.theta, z))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticConfig {
    pub c: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            c: 0.1,
            tolerance: 1e-8,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub theta: Vec<f64>,
    /// Loss after each accepted step, starting with the loss at θ = 0.
    pub losses: Vec<f64>,
    pub iterations: usize,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

#[inline]
fn linear(theta: &[f64], z: &[f64]) -> f64 {
    theta[0] + theta[1..].iter().zip(z).map(|(t, v)| t * v).sum::<f64>()
}

/// Regularised mean cross-entropy and its gradient.
///
/// `x` is row-major with `dim` columns and no bias column; `theta[0]` is the
/// bias and is not penalised.
pub fn logistic_objective(
    theta: &[f64],
    x: &[f64],
    dim: usize,
    y: &[f64],
    c: f64,
) -> (f64, Vec<f64>) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; dim + 1];
    for (row, &yi) in x.chunks_exact(dim).zip(y) {
        let z = linear(theta, row);
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        grad[0] += r;
        for (g, v) in grad[1..].iter_mut().zip(row) {
            *g += r * v;
        }
    }
    loss /= n;
    grad.iter_mut().for_each(|g| *g /= n);
    let penalty = 1.0 / (c * n);
    loss += 0.5 * penalty * theta[1..].iter().map(|t| t * t).sum::<f64>();
    for (g, t) in grad[1..].iter_mut().zip(&theta[1..]) {
        *g += penalty * t;
    }
    (loss, grad)
}

/// Gradient descent with Armijo backtracking on standardised inputs.
pub fn train_logistic(x: &[f64], dim: usize, y: &[f64], cfg: &LogisticConfig) -> Result<LogisticFit> {
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidParameter(format!("c must be positive, got {}", cfg.c)));
    }
    let mut theta = vec![0.0; dim + 1];
    let (mut loss, mut grad) = logistic_objective(&theta, x, dim, y, cfg.c);
    let mut losses = vec![loss];
    let mut step = 1.0;
    let mut iterations = 0;
    while iterations < cfg.max_iterations {
        iterations += 1;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2 == 0.0 {
            break;
        }
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, g)| t - step * g).collect();
            let (l, g) = logistic_objective(&cand, x, dim, y, cfg.c);
            if l <= loss - 1e-4 * step * g2 {
                accepted = Some((cand, l, g));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, l, g)) = accepted else { break };
        let change = loss - l;
        theta = cand;
        loss = l;
        grad = g;
        losses.push(loss);
        step = (step * 2.0).min(1e3);
        if change.abs() < cfg.tolerance {
            break;
        }
    }
    Ok(LogisticFit {
        theta,
        losses,
        iterations,
    })
}

pub fn fit_logistic(data: &LabeledDataset, c: f64) -> Result<(Standardizer, LogisticParams)> {
    fit_logistic_with(data, &LogisticConfig { c, ..Default::default() })
}

pub(crate) fn fit_logistic_with(
    data: &LabeledDataset,
    cfg: &LogisticConfig,
) -> Result<(Standardizer, LogisticParams)> {
    data.require_both_classes()?;
    let s = Standardizer::fit(data)?;
    let z = s.transform_all(data);
    let y: Vec<f64> = data.labels().iter().map(|l| l.as_u8() as f64).collect();
    let fit = train_logistic(&z, data.dim(), &y, cfg)?;
    Ok((s, LogisticParams { theta: fit.theta }))
}
