//! Sequential minimal optimization for the soft-margin dual
//!
//! ```text
//! max  Σ α_i - ½ Σ_ij α_i α_j y_i y_j K(x_i, x_j)
//! s.t. 0 ≤ α_i ≤ C,  Σ α_i y_i = 0
//! ```
//!
//! Working-set selection is deterministic: scan for the first multiplier that
//! violates its KKT condition, pair it with the multiplier maximizing
//! `|E_i - E_j|`, and fall back to the remaining candidates in index order when
//! that pair makes no progress.

use super::kernel::rbf_kernel;
use crate::error::{Error, Result};

/// Above this many points kernel rows are computed on demand instead of cached.
const DENSE_KERNEL_LIMIT: usize = 3000;

/// Minimum relative change for a step to count as progress.
const STEP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoParams {
    pub c: f64,
    pub gamma: f64,
    pub tol: f64,
    /// Budget of full scans over the multipliers.
    pub max_passes: usize,
}

#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    pub bias: f64,
    pub passes: usize,
}

enum KernelSource<'a> {
    Dense { n: usize, k: Vec<f64> },
    Lazy { points: &'a [Vec<f64>], gamma: f64 },
}

impl KernelSource<'_> {
    fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            KernelSource::Dense { n, k } => k[i * n + j],
            KernelSource::Lazy { points, gamma } => rbf_kernel(&points[i], &points[j], *gamma),
        }
    }
}

struct Solver<'a> {
    kernel: KernelSource<'a>,
    y: &'a [f64],
    alpha: Vec<f64>,
    /// `Σ_j α_j y_j K_ij`, i.e. the decision value without bias.
    grad: Vec<f64>,
    bias: f64,
    c: f64,
    tol: f64,
}

impl Solver<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn error(&self, i: usize) -> f64 {
        self.grad[i] + self.bias - self.y[i]
    }

    fn is_bound(&self, i: usize) -> bool {
        self.alpha[i] <= 0.0 || self.alpha[i] >= self.c
    }

    fn violation(&self, i: usize) -> f64 {
        let r = self.error(i) * self.y[i];
        if r < 0.0 && self.alpha[i] < self.c {
            -r
        } else if r > 0.0 && self.alpha[i] > 0.0 {
            r
        } else {
            0.0
        }
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1, a2) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let c = self.c;
        let (lo, hi) = if s < 0.0 {
            ((a2 - a1).max(0.0), (c + a2 - a1).min(c))
        } else {
            ((a1 + a2 - c).max(0.0), (a1 + a2).min(c))
        };
        if hi - lo <= 0.0 {
            return false;
        }
        let k11 = self.kernel.get(i1, i1);
        let k22 = self.kernel.get(i2, i2);
        let k12 = self.kernel.get(i1, i2);
        let eta = k11 + k22 - 2.0 * k12;

        let mut a2_new = if eta > 1e-12 {
            (a2 + y2 * (e1 - e2) / eta).clamp(lo, hi)
        } else {
            // Objective along the constraint line, relative to the current point.
            let cost = |a: f64| {
                let d = a - a2;
                0.5 * eta * d * d - y2 * (e1 - e2) * d
            };
            let (cl, ch) = (cost(lo), cost(hi));
            if cl < ch - 1e-12 {
                lo
            } else if ch < cl - 1e-12 {
                hi
            } else {
                a2
            }
        };
        if a2_new < 1e-12 * c {
            a2_new = 0.0;
        } else if a2_new > c * (1.0 - 1e-12) {
            a2_new = c;
        }
        if (a2_new - a2).abs() < STEP_EPS * (a2_new + a2 + STEP_EPS) {
            return false;
        }
        let mut a1_new = a1 + s * (a2 - a2_new);
        if a1_new < 1e-12 * c {
            a1_new = 0.0;
        } else if a1_new > c * (1.0 - 1e-12) {
            a1_new = c;
        }

        let d1 = y1 * (a1_new - a1);
        let d2 = y2 * (a2_new - a2);
        let b1 = self.bias - e1 - d1 * k11 - d2 * k12;
        let b2 = self.bias - e2 - d1 * k12 - d2 * k22;
        self.bias = if a1_new > 0.0 && a1_new < c {
            b1
        } else if a2_new > 0.0 && a2_new < c {
            b2
        } else {
            0.5 * (b1 + b2)
        };

        for i in 0..self.n() {
            self.grad[i] += d1 * self.kernel.get(i, i1) + d2 * self.kernel.get(i, i2);
        }
        self.alpha[i1] = a1_new;
        self.alpha[i2] = a2_new;
        true
    }

    fn examine(&mut self, i2: usize) -> bool {
        if self.violation(i2) <= self.tol {
            return false;
        }
        let n = self.n();
        let e2 = self.error(i2);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if j == i2 {
                continue;
            }
            let gap = (self.error(j) - e2).abs();
            if best.is_none_or(|(_, g)| gap > g) {
                best = Some((j, gap));
            }
        }
        if let Some((j, _)) = best {
            if self.take_step(j, i2) {
                return true;
            }
        }
        for j in 0..n {
            if !self.is_bound(j) && self.take_step(j, i2) {
                return true;
            }
        }
        for j in 0..n {
            if self.is_bound(j) && self.take_step(j, i2) {
                return true;
            }
        }
        false
    }

    fn worst_violation(&self) -> f64 {
        (0..self.n()).map(|i| self.violation(i)).fold(0.0, f64::max)
    }

    /// Bias from free multipliers, or the midpoint of the KKT-feasible interval.
    fn final_bias(&self) -> f64 {
        let free: Vec<usize> = (0..self.n()).filter(|&i| !self.is_bound(i)).collect();
        if !free.is_empty() {
            return free.iter().map(|&i| self.y[i] - self.grad[i]).sum::<f64>() / free.len() as f64;
        }
        let mut lower = f64::NEG_INFINITY;
        let mut upper = f64::INFINITY;
        for i in 0..self.n() {
            // y_i (g_i + b) >= 1 when α_i = 0, <= 1 when α_i = C.
            let edge = self.y[i] - self.grad[i];
            let wants_above = (self.alpha[i] <= 0.0) == (self.y[i] > 0.0);
            if wants_above {
                lower = lower.max(edge);
            } else {
                upper = upper.min(edge);
            }
        }
        match (lower.is_finite(), upper.is_finite()) {
            (true, true) => 0.5 * (lower + upper),
            (true, false) => lower,
            (false, true) => upper,
            (false, false) => self.bias,
        }
    }
}

/// Solves the dual for points with labels `y ∈ {+1, -1}`.
pub fn solve(points: &[Vec<f64>], y: &[f64], params: &SmoParams) -> Result<SmoSolution> {
    let n = points.len();
    if n != y.len() {
        return Err(Error::rejected("points and labels differ in length"));
    }
    if !(y.iter().any(|&v| v > 0.0) && y.iter().any(|&v| v < 0.0)) {
        return Err(Error::insufficient("binary training needs both classes"));
    }
    if !(params.c > 0.0 && params.gamma > 0.0 && params.tol > 0.0) {
        return Err(Error::rejected("C, gamma and tol must be positive"));
    }

    let kernel = if n <= DENSE_KERNEL_LIMIT {
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = rbf_kernel(&points[i], &points[j], params.gamma);
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        KernelSource::Dense { n, k }
    } else {
        KernelSource::Lazy {
            points,
            gamma: params.gamma,
        }
    };

    let mut solver = Solver {
        kernel,
        y,
        alpha: vec![0.0; n],
        grad: vec![0.0; n],
        bias: 0.0,
        c: params.c,
        tol: params.tol,
    };

    // `passes` counts full scans; runs of non-bound scans between two full
    // scans are capped at `n` so the budget still bounds the work.
    let mut passes = 0;
    let mut examine_all = true;
    let mut inner = 0;
    loop {
        if examine_all {
            if passes >= params.max_passes {
                return Err(Error::TrainingBudgetExceeded {
                    passes,
                    worst_violation: solver.worst_violation(),
                });
            }
            passes += 1;
        }
        let mut changed = 0;
        for i in 0..n {
            if (examine_all || !solver.is_bound(i)) && solver.examine(i) {
                changed += 1;
            }
        }
        if examine_all {
            if changed == 0 {
                break;
            }
            examine_all = false;
            inner = 0;
        } else {
            inner += 1;
            if changed == 0 || inner >= n {
                examine_all = true;
            }
        }
    }

    let bias = solver.final_bias();
    Ok(SmoSolution {
        alpha: solver.alpha,
        bias,
        passes,
    })
}

/// Dual objective `Σ α - ½ αᵀ Q α` with `Q_ij = y_i y_j K_ij`.
pub fn dual_objective(points: &[Vec<f64>], y: &[f64], alpha: &[f64], gamma: f64) -> f64 {
    let n = points.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if alpha[j] == 0.0 {
                continue;
            }
            quad += alpha[i] * alpha[j] * y[i] * y[j] * rbf_kernel(&points[i], &points[j], gamma);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}
