//! Sequential minimal optimization for the C-SVM dual
//!
//! ```text
//! min  1/2 a'Qa - e'a   s.t.  y'a = 0,  0 <= a_i <= C,   Q_ij = y_i y_j K_ij
//! ```
//!
//! Each step picks the maximal violating pair (i, j) and solves the
//! two-variable subproblem analytically. Training stops once the pair's
//! violation drops below `tol`, which also bounds every KKT residual by
//! `tol` for the bias chosen at the end.

use serde::{Deserialize, Serialize};

use super::kernel::{KernelMatrix, PolyKernel};
use super::SvmError;

const TAU: f64 = 1e-12;

/// Dual solution over all training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    /// Unsigned multipliers, one per training row.
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
}

/// A trained binary machine: `f(x) = sum alpha_i K(sv_i, x) + bias` where the
/// stored alphas already carry the label sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub bias: f64,
    pub kernel: PolyKernel,
    pub c: f64,
}

impl BinarySvm {
    pub fn from_solution(solution: &SmoSolution, x: &[Vec<f64>], y: &[f64], kernel: PolyKernel, c: f64) -> Self {
        let (support_vectors, alphas) = solution
            .alpha
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(|(i, &a)| (x[i].clone(), a * y[i]))
            .unzip();
        Self {
            support_vectors,
            alphas,
            bias: solution.bias,
            kernel,
            c,
        }
    }

    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.alphas)
            .map(|(sv, a)| a * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }
}

pub(crate) fn validate_labels(y: &[f64]) -> Result<(), SvmError> {
    if let Some(&bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
        return Err(SvmError::InvalidLabel(bad));
    }
    if !(y.contains(&1.0) && y.contains(&-1.0)) {
        return Err(SvmError::SingleClassInput);
    }
    Ok(())
}

pub(crate) fn validate_rows(x: &[Vec<f64>]) -> Result<(), SvmError> {
    for (row, r) in x.iter().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(SvmError::NonFiniteFeature { row, col });
        }
    }
    Ok(())
}

/// Trains one binary machine on raw rows with labels in {-1, +1}.
pub fn train_binary_svm(x: &[Vec<f64>], y: &[f64], kernel: PolyKernel, c: f64, tol: f64) -> Result<BinarySvm, SvmError> {
    if x.len() != y.len() {
        return Err(SvmError::InvalidParameter(format!("{} rows but {} labels", x.len(), y.len())));
    }
    validate_labels(y)?;
    validate_rows(x)?;
    let gram = KernelMatrix::new(&kernel, x);
    let solution = solve_smo(&gram, y, c, tol, default_max_iter(x.len()))?;
    Ok(BinarySvm::from_solution(&solution, x, y, kernel, c))
}

pub(crate) fn default_max_iter(n: usize) -> usize {
    (1000 * n).max(100_000)
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

pub fn solve_smo(gram: &KernelMatrix, y: &[f64], c: f64, tol: f64, max_iter: usize) -> Result<SmoSolution, SvmError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(SvmError::InvalidParameter(format!("C must be positive, got {c}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(SvmError::InvalidParameter(format!("tol must be positive, got {tol}")));
    }
    validate_labels(y)?;
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of the dual objective
    let mut grad = vec![-1.0; n];

    let mut iterations = 0;
    loop {
        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut g_min = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t], c) && v > g_max {
                g_max = v;
                i = t;
            }
            if in_low(alpha[t], y[t], c) && v < g_min {
                g_min = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < tol {
            break;
        }
        if iterations >= max_iter {
            return Err(SvmError::NotConverged(max_iter));
        }
        iterations += 1;

        let (kii, kjj, kij) = (gram.get(i, i), gram.get(j, j), gram.get(i, j));
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (old_i, old_j);
        if y[i] != y[j] {
            let quad = (kii + kjj + 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (kii + kjj - 2.0 * y[i] * y[j] * kij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;

        let (di, dj) = (ai - old_i, aj - old_j);
        let (row_i, row_j) = (gram.row(i), gram.row(j));
        for t in 0..n {
            grad[t] += y[t] * (y[i] * row_i[t] * di + y[j] * row_j[t] * dj);
        }
    }

    Ok(SmoSolution {
        bias: bias_from_gradient(&alpha, &grad, y, c),
        alpha,
        iterations,
    })
}

/// Bias as the mean over free multipliers, or the midpoint of the feasible
/// interval when every multiplier sits at a bound.
fn bias_from_gradient(alpha: &[f64], grad: &[f64], y: &[f64], c: f64) -> f64 {
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free_sum += yg;
            free += 1;
        }
    }
    let rho = if free > 0 { free_sum / free as f64 } else { (ub + lb) / 2.0 };
    -rho
}

/// Rows violating their KKT case by more than `tol`, given each row's
/// decision value `f` and multiplier.
pub fn kkt_violations(alpha: &[f64], y: &[f64], f: &[f64], c: f64, tol: f64) -> Vec<usize> {
    (0..alpha.len())
        .filter(|&i| {
            let margin = y[i] * f[i];
            if alpha[i] <= 0.0 {
                margin < 1.0 - tol
            } else if alpha[i] >= c {
                margin > 1.0 + tol
            } else {
                (margin - 1.0).abs() > tol
            }
        })
        .collect()
}
