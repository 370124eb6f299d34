//! Gaussian fluctuations of the portfolio loss around its limit.
//!
//! For the loss `L(t) = e(lambda) y(t)` and under reciprocity
//! (`beta = b * alpha`), the limit variance of `sqrt(N) (L^N(t)/N - l(t))` is
//!
//! ```text
//! V(t) = Var(L(t)) + int_0^t A(s)^2 B(s) ds
//! A(s) = sum_k p_k alpha_k q_k(s) (e_k - l(t))
//! B(s) = sum_k p_k beta_k^2 (1 - q_k(s)) exp(-gamma_k + beta_k m(s))
//! ```
//!
//! evaluated here by trapezoidal quadrature on the limit solution grid.
//! [`mc_validate_covdiag`] estimates the same quantity from its stochastic
//! integral representation with respect to the compensated default
//! martingale of a single limit firm.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::limit::{self, LimitError, LimitSolution};
use crate::model::{sample_class, Environment, ReciprocityCertificate};
use crate::rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CltError {
    #[error("t = {0} is not a point of the solution grid")]
    NotAGridPoint(f64),
    #[error("a reciprocity certificate is required")]
    ReciprocityRequired,
    #[error("reciprocity certificate does not hold for this environment")]
    CertificateMismatch,
    #[error("at least one threshold is required")]
    EmptyThresholds,
    #[error("at least {min} replicas required, got {got}")]
    TooFewReplicas { min: usize, got: usize },
    #[error(transparent)]
    Limit(#[from] LimitError),
}

/// Limit mean and variance of the loss at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceReport {
    pub horizon: f64,
    pub l: f64,
    pub static_var: f64,
    pub contagion_var: f64,
    pub total: f64,
    pub b: f64,
}

fn require_cert<'a>(
    env: &Environment,
    cert: Option<&'a ReciprocityCertificate>,
) -> Result<&'a ReciprocityCertificate, CltError> {
    let cert = cert.ok_or(CltError::ReciprocityRequired)?;
    if !cert.holds_for(env) {
        return Err(CltError::CertificateMismatch);
    }
    Ok(cert)
}

fn check_dims(sol: &LimitSolution, env: &Environment) -> Result<(), CltError> {
    if sol.classes() != env.len() {
        return Err(LimitError::DimensionMismatch {
            solution: sol.classes(),
            environment: env.len(),
        }
        .into());
    }
    Ok(())
}

/// `A(s)` for every grid point `s <= t_grid[upto]`, given the loss `l(t)`.
fn covariance_weight(sol: &LimitSolution, env: &Environment, upto: usize, l: f64) -> Vec<f64> {
    sol.q[..=upto]
        .iter()
        .map(|row| {
            env.classes()
                .iter()
                .zip(row)
                .map(|(c, qk)| c.weight * c.alpha * qk * (c.exposure - l))
                .sum()
        })
        .collect()
}

/// Closed-form limit variance of the loss at grid time `t`.
pub fn variance_horizon(
    sol: &LimitSolution,
    env: &Environment,
    t: f64,
    cert: Option<&ReciprocityCertificate>,
) -> Result<VarianceReport, CltError> {
    let cert = require_cert(env, cert)?;
    check_dims(sol, env)?;
    let g = sol.grid_index(t).ok_or(CltError::NotAGridPoint(t))?;
    Ok(report_at(sol, env, g, cert.b))
}

fn report_at(sol: &LimitSolution, env: &Environment, g: usize, b: f64) -> VarianceReport {
    let q_t = &sol.q[g];
    let l = limit::loss_at(env, q_t);
    let second: f64 = env
        .classes()
        .iter()
        .zip(q_t)
        .map(|(c, qk)| c.weight * c.exposure * c.exposure * qk)
        .sum();
    let static_var = (second - l * l).max(0.0);

    let a = covariance_weight(sol, env, g, l);
    let integrand: Vec<f64> = a
        .iter()
        .enumerate()
        .map(|(s, a_s)| {
            let b_s: f64 = env
                .classes()
                .iter()
                .enumerate()
                .map(|(k, c)| c.weight * c.beta * c.beta * (1.0 - sol.q[s][k]) * sol.hazard[s][k])
                .sum();
            a_s * a_s * b_s
        })
        .collect();
    let contagion_var: f64 = integrand
        .windows(2)
        .zip(sol.t_grid.windows(2))
        .map(|(f, t)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum();

    let report = VarianceReport {
        horizon: sol.t_grid[g],
        l,
        static_var,
        contagion_var,
        total: static_var + contagion_var,
        b,
    };
    debug_assert!(report.total >= report.static_var);
    report
}

/// Upper tail `1 - Phi(z)` of the standard normal.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Gaussian approximation of `P(L^N(t)/N >= x)` for a portfolio of `n` firms.
///
/// Losses are nonnegative, so any `x <= 0` is exceeded with probability one.
pub fn excess_prob(report: &VarianceReport, n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if report.total <= 0.0 {
        return if x <= report.l { 1.0 } else { 0.0 };
    }
    normal_sf((x - report.l) * (n as f64).sqrt() / report.total.sqrt())
}

/// Excess probabilities for each time in `t_grid` (rows) and threshold (columns).
pub fn excess_curve(
    sol: &LimitSolution,
    env: &Environment,
    cert: Option<&ReciprocityCertificate>,
    n: usize,
    thresholds: &[f64],
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>, CltError> {
    if thresholds.is_empty() {
        return Err(CltError::EmptyThresholds);
    }
    let cert = require_cert(env, cert)?;
    check_dims(sol, env)?;
    let indices = t_grid
        .iter()
        .map(|&t| sol.grid_index(t).ok_or(CltError::NotAGridPoint(t)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(indices
        .into_par_iter()
        .map(|g| {
            let report = report_at(sol, env, g, cert.b);
            thresholds.iter().map(|&x| excess_prob(&report, n, x)).collect()
        })
        .collect())
}

/// Monte-Carlo estimate of the variance and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovDiagEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub replicas: usize,
}

/// Estimates `V(t)` as `E[X^2]` with
///
/// ```text
/// X = (e_k y(t) - l(t)) - b alpha_k * int_0^t (1 - y(s-)) A(s) dM(s)
/// ```
///
/// where `M` is the compensated default indicator of a single firm drawn
/// from the limit law. The stochastic integral splits into the jump
/// `1{tau <= t} A(tau)` and the compensator `int_0^{tau ^ t} A(s) h_k(s) ds`,
/// both evaluated on the solution grid with linear interpolation inside a step.
///
/// Replica `r` reads stream `(seed, r)`; batches are merged in index order.
pub fn mc_validate_covdiag(
    sol: &LimitSolution,
    env: &Environment,
    cert: Option<&ReciprocityCertificate>,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<CovDiagEstimate, CltError> {
    const MIN_REPLICAS: usize = 100;
    let cert = require_cert(env, cert)?;
    check_dims(sol, env)?;
    if replicas < MIN_REPLICAS {
        return Err(CltError::TooFewReplicas {
            min: MIN_REPLICAS,
            got: replicas,
        });
    }
    let gt = sol.grid_index(t).ok_or(CltError::NotAGridPoint(t))?;
    let t = sol.t_grid[gt];
    let l = limit::loss_at(env, &sol.q[gt]);
    let a = covariance_weight(sol, env, gt, l);

    // cumulative compensator integral of A(s) h_k(s) per class
    let compensator: Vec<Vec<f64>> = (0..env.len())
        .map(|k| {
            let mut acc = 0.0;
            let mut out = Vec::with_capacity(gt + 1);
            out.push(0.0);
            for s in 1..=gt {
                let dt = sol.t_grid[s] - sol.t_grid[s - 1];
                acc += 0.5 * dt * (a[s - 1] * sol.hazard[s - 1][k] + a[s] * sol.hazard[s][k]);
                out.push(acc);
            }
            out
        })
        .collect();

    let hazard_cols: Vec<Vec<f64>> = (0..env.len()).map(|k| sol.hazard.iter().map(|h| h[k]).collect()).collect();

    let interp = |values: &[f64], g: usize, frac: f64| -> f64 {
        if frac == 0.0 {
            values[g]
        } else {
            values[g] + frac * (values[g + 1] - values[g])
        }
    };

    let draw = |r: usize| -> f64 {
        let mut rng = rng::stream(seed, r as u64);
        let k = sample_class(env, rng.random());
        let class = env.class(k);
        let tau = limit::sample_limit_default_time(sol, k, &mut rng)
            .expect("class index from environment")
            .time()
            .filter(|&tau| tau <= t);
        let scale = cert.b * class.alpha;
        match tau {
            Some(tau) => {
                let pos = (tau / sol.step).min(gt as f64);
                let g = (pos.floor() as usize).min(gt.saturating_sub(1));
                let frac = (tau - sol.t_grid[g]) / sol.step;
                let jump = interp(&a, g, frac);
                // trapezoid on the partial step with the integrand interpolated linearly
                let f0 = a[g] * sol.hazard[g][k];
                let f_tau = jump * interp(&hazard_cols[k], g, frac);
                let comp = compensator[k][g] + 0.5 * (tau - sol.t_grid[g]) * (f0 + f_tau);
                (class.exposure - l) - scale * (jump - comp)
            }
            None => -l + scale * compensator[k][gt],
        }
    };

    let partials: Vec<(f64, f64, usize)> = rng::batches(replicas)
        .into_par_iter()
        .map(|range| {
            // Welford on X^2
            let (mut mean, mut m2, mut count) = (0.0, 0.0, 0usize);
            for r in range {
                let x = draw(r);
                let y = x * x;
                count += 1;
                let delta = y - mean;
                mean += delta / count as f64;
                m2 += delta * (y - mean);
            }
            (mean, m2, count)
        })
        .collect();

    let (mut mean, mut m2, mut count) = (0.0, 0.0, 0usize);
    for (pm, pm2, pc) in partials {
        if count == 0 {
            (mean, m2, count) = (pm, pm2, pc);
            continue;
        }
        let (na, nb) = (count as f64, pc as f64);
        let delta = pm - mean;
        mean += delta * nb / (na + nb);
        m2 += pm2 + delta * delta * na * nb / (na + nb);
        count += pc;
    }
    let var = m2 / (count - 1) as f64;
    Ok(CovDiagEstimate {
        estimate: mean,
        std_error: (var / count as f64).sqrt(),
        replicas: count,
    })
}
