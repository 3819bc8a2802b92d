use std::collections::VecDeque;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Standardizer};
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

/// Support vectors in standardised space with coefficients `α_i·y_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub gamma: f64,
    pub bias: f64,
    pub dim: usize,
    pub support_vectors: Vec<f64>,
    pub dual_coef: Vec<f64>,
}

impl SvmParams {
    pub fn n_support(&self) -> usize {
        self.dual_coef.len()
    }

    /// Signed margin `Σ α_i y_i K(x_i, z) + b`.
    pub fn decision(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .chunks_exact(self.dim)
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf_kernel(sv, z, self.gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[inline]
pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// `1 / (d · var)` over every entry of a row-major matrix.
pub fn scale_gamma(x: &[f64], dim: usize) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0 / dim as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoConfig {
    pub c: f64,
    pub tolerance: f64,
    /// `None` uses `max(10^7, 100·n)`.
    pub max_iterations: Option<usize>,
    /// Kernel rows held in the LRU cache.
    pub cache_rows: usize,
    /// Record the dual objective after every pair update.
    pub trace: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tolerance: 1e-3,
            max_iterations: None,
            cache_rows: 2048,
            trace: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Maximal KKT violation `m(α) − M(α)` at exit.
    pub violation: f64,
    /// Dual objective `Σα − ½αᵀQα`, initial value first.
    pub objective: Vec<f64>,
}

impl SmoSolution {
    pub fn dual_objective(&self, x: &[f64], dim: usize, y: &[f64], gamma: f64) -> f64 {
        dual_objective(&self.alpha, x, dim, y, gamma)
    }
}

pub(crate) fn dual_objective(alpha: &[f64], x: &[f64], dim: usize, y: &[f64], gamma: f64) -> f64 {
    let rows: Vec<&[f64]> = x.chunks_exact(dim).collect();
    let mut quad = 0.0;
    for i in 0..alpha.len() {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..alpha.len() {
            if alpha[j] != 0.0 {
                quad += alpha[i] * alpha[j] * y[i] * y[j] * rbf_kernel(rows[i], rows[j], gamma);
            }
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

struct QCache<'a> {
    rows: Vec<&'a [f64]>,
    y: &'a [f64],
    gamma: f64,
    cached: Vec<Option<Rc<Vec<f64>>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> QCache<'a> {
    fn new(x: &'a [f64], dim: usize, y: &'a [f64], gamma: f64, capacity: usize) -> Self {
        let rows: Vec<&[f64]> = x.chunks_exact(dim).collect();
        let n = rows.len();
        Self {
            rows,
            y,
            gamma,
            cached: vec![None; n],
            order: VecDeque::new(),
            capacity: capacity.max(2),
        }
    }

    /// Row `i` of `Q_ij = y_i y_j K(x_i, x_j)`.
    fn row(&mut self, i: usize) -> Rc<Vec<f64>> {
        if let Some(r) = &self.cached[i] {
            let r = Rc::clone(r);
            if let Some(pos) = self.order.iter().position(|&k| k == i) {
                self.order.remove(pos);
            }
            self.order.push_back(i);
            return r;
        }
        let xi = self.rows[i];
        let yi = self.y[i];
        let r: Rc<Vec<f64>> = Rc::new(
            self.rows
                .iter()
                .zip(self.y)
                .map(|(xj, yj)| yi * yj * rbf_kernel(xi, xj, self.gamma))
                .collect(),
        );
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cached[old] = None;
            }
        }
        self.cached[i] = Some(Rc::clone(&r));
        self.order.push_back(i);
        r
    }
}

/// Solves the C-SVC dual with second-order working-set selection.
///
/// `x` is row-major standardised data and `y` holds ±1 targets.
pub fn solve_smo(x: &[f64], dim: usize, y: &[f64], gamma: f64, cfg: &SmoConfig) -> Result<SmoSolution> {
    let n = y.len();
    if !(cfg.c > 0.0) {
        return Err(Error::InvalidParameter(format!("C must be positive, got {}", cfg.c)));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    if x.len() != n * dim || n == 0 {
        return Err(Error::DimensionMismatch {
            expected: n * dim,
            got: x.len(),
        });
    }
    let c = cfg.c;
    let max_iter = cfg.max_iterations.unwrap_or_else(|| (100 * n).max(10_000_000));
    let mut cache = QCache::new(x, dim, y, gamma, cfg.cache_rows);
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut objective = Vec::new();
    let dual = |alpha: &[f64], grad: &[f64]| -> f64 {
        -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
    };
    if cfg.trace {
        objective.push(0.0);
    }
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let violation;
    loop {
        // Select i with the largest -y_t G_t over I_up.
        let mut gmax = f64::NEG_INFINITY;
        let mut gmax_idx = usize::MAX;
        for t in 0..n {
            if y[t] > 0.0 {
                if !upper(alpha[t]) && -grad[t] >= gmax {
                    gmax = -grad[t];
                    gmax_idx = t;
                }
            } else if !lower(alpha[t]) && grad[t] >= gmax {
                gmax = grad[t];
                gmax_idx = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut gmin_idx = usize::MAX;
        let mut obj_min = f64::INFINITY;
        let qi = (gmax_idx != usize::MAX).then(|| cache.row(gmax_idx));
        for j in 0..n {
            let (in_low, grad_diff, yg) = if y[j] > 0.0 {
                (!lower(alpha[j]), gmax + grad[j], grad[j])
            } else {
                (!upper(alpha[j]), gmax - grad[j], -grad[j])
            };
            if !in_low {
                continue;
            }
            if yg >= gmax2 {
                gmax2 = yg;
            }
            if let Some(qi) = &qi {
                if grad_diff > 0.0 {
                    // Q_ii + Q_jj - 2 y_i y_j Q_ij, with unit diagonal for RBF.
                    let quad = 2.0 - 2.0 * y[gmax_idx] * y[j] * qi[j];
                    let q = if quad > 0.0 { quad } else { TAU };
                    let obj = -(grad_diff * grad_diff) / q;
                    if obj <= obj_min {
                        gmin_idx = j;
                        obj_min = obj;
                    }
                }
            }
        }
        let v = gmax + gmax2;
        if v < cfg.tolerance || gmin_idx == usize::MAX {
            violation = v.max(0.0);
            break;
        }
        if iterations >= max_iter {
            return Err(Error::SvmNotConverged {
                iterations,
                violation: v,
            });
        }
        iterations += 1;

        let (i, j) = (gmax_idx, gmin_idx);
        let qi = qi.expect("working index selected");
        let qj = cache.row(j);
        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = {
                let q = 2.0 + 2.0 * qi[j];
                if q > 0.0 { q } else { TAU }
            };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = {
                let q = 2.0 - 2.0 * qi[j];
                if q > 0.0 { q } else { TAU }
            };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (dai, daj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for t in 0..n {
            grad[t] += qi[t] * dai + qj[t] * daj;
        }
        if cfg.trace {
            objective.push(dual(&alpha, &grad));
        }
    }

    // Bias from free vectors, else the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut nfree, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            nfree += 1;
            sum_free += yg;
        }
    }
    let rho = if nfree > 0 {
        sum_free / nfree as f64
    } else {
        (ub + lb) / 2.0
    };
    Ok(SmoSolution {
        alpha,
        bias: -rho,
        iterations,
        violation,
        objective,
    })
}

/// Fits on standardised data; `gamma = None` uses [`scale_gamma`].
pub fn fit_svm_rbf(
    data: &LabeledDataset,
    c: f64,
    gamma: Option<f64>,
) -> Result<(Standardizer, SvmParams)> {
    fit_svm_with(data, gamma, &SmoConfig { c, ..Default::default() })
}

pub(crate) fn fit_svm_with(
    data: &LabeledDataset,
    gamma: Option<f64>,
    cfg: &SmoConfig,
) -> Result<(Standardizer, SvmParams)> {
    data.require_both_classes()?;
    let s = Standardizer::fit(data)?;
    let z = s.transform_all(data);
    let dim = data.dim();
    let gamma = gamma.unwrap_or_else(|| scale_gamma(&z, dim));
    let y: Vec<f64> = data
        .labels()
        .iter()
        .map(|l| if l.is_slip() { 1.0 } else { -1.0 })
        .collect();
    let sol = solve_smo(&z, dim, &y, gamma, cfg)?;
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, &a) in sol.alpha.iter().enumerate() {
        if a > 0.0 {
            support_vectors.extend_from_slice(&z[i * dim..(i + 1) * dim]);
            dual_coef.push(a * y[i]);
        }
    }
    Ok((
        s,
        SvmParams {
            gamma,
            bias: sol.bias,
            dim,
            support_vectors,
            dual_coef,
        },
    ))
}
