//! Large-portfolio limit of the default process.
//!
//! In the limit each class `k` defaults independently with the deterministic
//! hazard `h_k(t) = exp(-gamma_k + beta_k * m(t))`, where the aggregate
//! `m(t) = sum_j p_j alpha_j q_j(t)` is itself determined by the per-class
//! default probabilities. This closes into the `K`-dimensional system
//!
//! ```text
//! dq_k/dt = exp(-gamma_k + beta_k * sum_j p_j alpha_j q_j) * (1 - q_k),   q_k(0) = 0
//! ```
//!
//! solved here with fixed-step classic RK4. A second pass with half the step
//! certifies the result at the horizon.

use rand::Rng;
use rand_distr::Exp1;
use thiserror::Error;

use crate::model::{Environment, FirmClass};
use crate::rng::SimRng;

pub const DEFAULT_GRID_SIZE: usize = 4096;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LimitError {
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("grid size must be at least 2, got {0}")]
    GridTooSmall(usize),
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("step too coarse: half-step estimate differs by {error:e} (tolerance {tolerance:e})")]
    StepTooCoarse { error: f64, tolerance: f64 },
    #[error("clamping moved q by {amount:e}, above tolerance {tolerance:e}")]
    ClampExceeded { amount: f64, tolerance: f64 },
    #[error("solution has {solution} classes, environment has {environment}")]
    DimensionMismatch { solution: usize, environment: usize },
    #[error("class index {0} out of range")]
    InvalidClass(usize),
}

/// Solution of the limit equation on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSolution {
    pub t_grid: Vec<f64>,
    /// `q[g][k]`: default probability of class `k` at `t_grid[g]`.
    pub q: Vec<Vec<f64>>,
    /// Aggregate variable `m(t)`.
    pub m: Vec<f64>,
    /// `hazard[g][k] = exp(-gamma_k + beta_k * m[g])`.
    pub hazard: Vec<Vec<f64>>,
    /// Trapezoidal integral of the hazard from 0.
    pub cum_hazard: Vec<Vec<f64>>,
    pub step: f64,
    /// Half-step estimate of the error in `q` at the horizon.
    pub error_estimate: f64,
}

impl LimitSolution {
    pub fn horizon(&self) -> f64 {
        *self.t_grid.last().unwrap()
    }

    pub fn classes(&self) -> usize {
        self.q[0].len()
    }

    /// Number of steps `G`; the grid has `G + 1` points.
    pub fn grid_size(&self) -> usize {
        self.t_grid.len() - 1
    }

    /// Index of the grid point equal to `t`, if there is one.
    pub fn grid_index(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0 && t <= self.horizon() * (1.0 + 1e-12)) {
            return None;
        }
        let g = (t / self.step).round() as usize;
        let g = g.min(self.grid_size());
        ((self.t_grid[g] - t).abs() <= 1e-9 * self.step).then_some(g)
    }

    /// Column of `q` for class `k`.
    pub fn class_curve(&self, k: usize) -> Vec<f64> {
        self.q.iter().map(|row| row[k]).collect()
    }

    /// Cubic Lagrange interpolation of `m` at `t`.
    pub fn aggregate_at(&self, t: f64) -> f64 {
        let last = self.grid_size();
        let pos = (t / self.step).clamp(0.0, last as f64);
        let width = 4.min(last + 1);
        let start = (pos.floor() as usize)
            .saturating_sub(1)
            .min(last + 1 - width);
        let mut value = 0.0;
        for i in start..start + width {
            let mut basis = 1.0;
            for j in start..start + width {
                if j != i {
                    basis *= (pos - j as f64) / (i as f64 - j as f64);
                }
            }
            value += basis * self.m[i];
        }
        value
    }

    /// Default probability on the grid of a type with parameters `class`,
    /// which need not be a support point, driven by the solved aggregate.
    ///
    /// Integrates the scalar linear equation `dq/dt = h(t) (1 - q)` with RK4,
    /// taking midpoint aggregates from [`aggregate_at`](Self::aggregate_at).
    pub fn off_support_curve(&self, class: &FirmClass) -> Vec<f64> {
        let h = self.step;
        let mut q = 0.0;
        let mut out = Vec::with_capacity(self.t_grid.len());
        out.push(0.0);
        for g in 0..self.grid_size() {
            let r0 = class.rate(self.m[g]);
            let rm = class.rate(self.aggregate_at(self.t_grid[g] + 0.5 * h));
            let r1 = class.rate(self.m[g + 1]);
            let k1 = r0 * (1.0 - q);
            let k2 = rm * (1.0 - (q + 0.5 * h * k1));
            let k3 = rm * (1.0 - (q + 0.5 * h * k2));
            let k4 = r1 * (1.0 - (q + h * k3));
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            out.push(q.clamp(0.0, 1.0));
        }
        out
    }
}

fn vector_field(env: &Environment, q: &[f64], out: &mut [f64]) {
    let m: f64 = env
        .classes()
        .iter()
        .zip(q)
        .map(|(c, qk)| c.weight * c.alpha * qk)
        .sum();
    for ((o, c), qk) in out.iter_mut().zip(env.classes()).zip(q) {
        *o = c.rate(m) * (1.0 - qk);
    }
}

struct Trajectory {
    q: Vec<Vec<f64>>,
    max_clamp: f64,
}

fn integrate(env: &Environment, horizon: f64, steps: usize) -> Trajectory {
    let k = env.len();
    let h = horizon / steps as f64;
    let mut q = vec![0.0; k];
    let mut k1 = vec![0.0; k];
    let mut k2 = vec![0.0; k];
    let mut k3 = vec![0.0; k];
    let mut k4 = vec![0.0; k];
    let mut tmp = vec![0.0; k];
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push(q.clone());
    let mut max_clamp = 0.0_f64;

    for _ in 0..steps {
        vector_field(env, &q, &mut k1);
        for i in 0..k {
            tmp[i] = q[i] + 0.5 * h * k1[i];
        }
        vector_field(env, &tmp, &mut k2);
        for i in 0..k {
            tmp[i] = q[i] + 0.5 * h * k2[i];
        }
        vector_field(env, &tmp, &mut k3);
        for i in 0..k {
            tmp[i] = q[i] + h * k3[i];
        }
        vector_field(env, &tmp, &mut k4);
        for i in 0..k {
            let next = q[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            let clamped = next.clamp(0.0, 1.0);
            max_clamp = max_clamp.max((next - clamped).abs());
            q[i] = clamped;
        }
        rows.push(q.clone());
    }
    Trajectory { q: rows, max_clamp }
}

/// Solves the limit equation on `[0, horizon]` with `grid_size` RK4 steps.
///
/// The run is repeated with `2 * grid_size` steps; the Richardson estimate
/// `|q_h - q_{h/2}| * 16/15` of the error at the horizon must not exceed
/// `tolerance`.
pub fn solve_limit(
    env: &Environment,
    horizon: f64,
    grid_size: usize,
    tolerance: f64,
) -> Result<LimitSolution, LimitError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(LimitError::InvalidHorizon(horizon));
    }
    if grid_size < 2 {
        return Err(LimitError::GridTooSmall(grid_size));
    }
    if !(tolerance > 0.0) {
        return Err(LimitError::InvalidTolerance(tolerance));
    }

    let coarse = integrate(env, horizon, grid_size);
    let fine = integrate(env, horizon, 2 * grid_size);
    let max_clamp = coarse.max_clamp.max(fine.max_clamp);
    if max_clamp > tolerance {
        return Err(LimitError::ClampExceeded {
            amount: max_clamp,
            tolerance,
        });
    }
    let error_estimate = coarse.q[grid_size]
        .iter()
        .zip(&fine.q[2 * grid_size])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        * 16.0
        / 15.0;
    if !(error_estimate <= tolerance) {
        return Err(LimitError::StepTooCoarse {
            error: error_estimate,
            tolerance,
        });
    }

    let step = horizon / grid_size as f64;
    let mut t_grid: Vec<f64> = (0..=grid_size).map(|g| g as f64 * step).collect();
    t_grid[grid_size] = horizon;

    let q = coarse.q;
    let m: Vec<f64> = q
        .iter()
        .map(|row| {
            env.classes()
                .iter()
                .zip(row)
                .map(|(c, qk)| c.weight * c.alpha * qk)
                .sum()
        })
        .collect();
    let hazard: Vec<Vec<f64>> = m
        .iter()
        .map(|&mg| env.classes().iter().map(|c| c.rate(mg)).collect())
        .collect();
    let mut cum_hazard = Vec::with_capacity(grid_size + 1);
    let mut running = vec![0.0; env.len()];
    cum_hazard.push(running.clone());
    for g in 1..=grid_size {
        let dt = t_grid[g] - t_grid[g - 1];
        for (k, acc) in running.iter_mut().enumerate() {
            *acc += 0.5 * dt * (hazard[g - 1][k] + hazard[g][k]);
        }
        cum_hazard.push(running.clone());
    }

    Ok(LimitSolution {
        t_grid,
        q,
        m,
        hazard,
        cum_hazard,
        step,
        error_estimate,
    })
}

fn check_dimensions(sol: &LimitSolution, env: &Environment) -> Result<(), LimitError> {
    if sol.classes() != env.len() {
        return Err(LimitError::DimensionMismatch {
            solution: sol.classes(),
            environment: env.len(),
        });
    }
    Ok(())
}

/// Expected loss per firm `l(t) = sum_k p_k e_k q_k(t)` on the solution grid.
pub fn limit_loss(sol: &LimitSolution, env: &Environment) -> Result<Vec<f64>, LimitError> {
    check_dimensions(sol, env)?;
    Ok(sol.q.iter().map(|row| loss_at(env, row)).collect())
}

pub(crate) fn loss_at(env: &Environment, q_row: &[f64]) -> f64 {
    env.classes()
        .iter()
        .zip(q_row)
        .map(|(c, qk)| c.weight * c.exposure * qk)
        .sum()
}

/// Outcome of a default-time draw under the limit law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LimitDefault {
    /// Default at the given time in `(0, T]`.
    At(f64),
    /// Survival past the horizon.
    NoDefault,
}

impl LimitDefault {
    pub fn time(self) -> Option<f64> {
        match self {
            LimitDefault::At(t) => Some(t),
            LimitDefault::NoDefault => None,
        }
    }
}

/// Time at which the piecewise-linear cumulative hazard of class `k` reaches `level`.
pub fn invert_cum_hazard(
    sol: &LimitSolution,
    k: usize,
    level: f64,
) -> Result<LimitDefault, LimitError> {
    if k >= sol.classes() {
        return Err(LimitError::InvalidClass(k));
    }
    let last = sol.grid_size();
    if level > sol.cum_hazard[last][k] {
        return Ok(LimitDefault::NoDefault);
    }
    // first grid index with cum_hazard >= level, found by bisection
    let (mut lo, mut hi) = (0usize, last);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if sol.cum_hazard[mid][k] >= level {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == 0 {
        return Ok(LimitDefault::At(0.0));
    }
    let (h0, h1) = (sol.cum_hazard[lo - 1][k], sol.cum_hazard[lo][k]);
    let (t0, t1) = (sol.t_grid[lo - 1], sol.t_grid[lo]);
    let frac = if h1 > h0 { (level - h0) / (h1 - h0) } else { 1.0 };
    Ok(LimitDefault::At(t0 + frac * (t1 - t0)))
}

/// Draws a default time for class `k` by inverse transform of the cumulative hazard.
pub fn sample_limit_default_time(
    sol: &LimitSolution,
    k: usize,
    rng: &mut SimRng,
) -> Result<LimitDefault, LimitError> {
    let level: f64 = rng.sample(Exp1);
    invert_cum_hazard(sol, k, level)
}
