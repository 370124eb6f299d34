//! Exact simulation of the finite interacting default process.
//!
//! A surviving firm `i` defaults at rate `exp(beta_i * m - gamma_i)` where
//! `m = (1/N) * sum_j alpha_j * y_j` is the impact-weighted default fraction.
//! Defaults are absorbing.
//!
//! Rates depend on the firm only through its class, so the simulator keeps
//! per-class survivor counts: the next event time is exponential with the
//! total rate `sum_k survivors_k * rate_k`, the class is picked in proportion
//! to its share, and the defaulting firm is uniform among the class
//! survivors. This is the direct Gillespie method with `O(K)` work per event.

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::Portfolio;
use crate::rng::{self, SimRng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CtmcError {
    #[error("horizon must be positive and finite, got {0}")]
    InvalidHorizon(f64),
    #[error("grid point {t} outside [0, {horizon}]")]
    GridOutOfRange { t: f64, horizon: f64 },
    #[error("time grid must be nondecreasing")]
    GridNotSorted,
    #[error("event log was produced by a different portfolio")]
    PortfolioMismatch,
    #[error("at least {min} replicas required, got {got}")]
    TooFewReplicas { min: usize, got: usize },
    #[error("defaulted mask has length {got}, portfolio has {expected} firms")]
    LengthMismatch { expected: usize, got: usize },
}

/// Default of one firm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultEvent {
    pub time: f64,
    pub firm: usize,
}

/// Ordered defaults of one simulated path on `(0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub events: Vec<DefaultEvent>,
    pub horizon: f64,
    pub portfolio_id: u64,
}

/// Default rates of every firm for the given default indicators.
pub fn intensities(portfolio: &Portfolio, defaulted: &[bool]) -> Result<Vec<f64>, CtmcError> {
    let n = portfolio.n();
    if defaulted.len() != n {
        return Err(CtmcError::LengthMismatch {
            expected: n,
            got: defaulted.len(),
        });
    }
    let aggregate = defaulted
        .iter()
        .enumerate()
        .filter(|(_, &d)| d)
        .map(|(i, _)| portfolio.class_of_firm(i).alpha)
        .sum::<f64>()
        / n as f64;
    Ok(defaulted
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            if d {
                0.0
            } else {
                portfolio.class_of_firm(i).rate(aggregate)
            }
        })
        .collect())
}

/// Simulates one path from the all-survive state up to `horizon`.
pub fn simulate_path(
    portfolio: &Portfolio,
    horizon: f64,
    rng: &mut SimRng,
) -> Result<EventLog, CtmcError> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CtmcError::InvalidHorizon(horizon));
    }
    let env = portfolio.environment();
    let k_count = env.len();
    let n = portfolio.n() as f64;

    let mut survivors: Vec<Vec<usize>> = vec![Vec::new(); k_count];
    for (firm, &k) in portfolio.class_of().iter().enumerate() {
        survivors[k].push(firm);
    }
    let mut class_rate = vec![0.0; k_count];
    let mut aggregate = 0.0;
    let mut t = 0.0;
    let mut events = Vec::new();

    loop {
        let mut total = 0.0;
        for (k, c) in env.classes().iter().enumerate() {
            class_rate[k] = survivors[k].len() as f64 * c.rate(aggregate);
            total += class_rate[k];
        }
        if total <= 0.0 {
            break;
        }
        let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
        if t + wait > horizon {
            break;
        }
        t += wait;

        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut k = k_count - 1;
        for (j, r) in class_rate.iter().enumerate() {
            acc += r;
            if target < acc && !survivors[j].is_empty() {
                k = j;
                break;
            }
        }
        // round-off can leave `k` on an exhausted class
        if survivors[k].is_empty() {
            k = (0..k_count).rev().find(|&j| !survivors[j].is_empty()).unwrap();
        }
        let slot = rng.random_range(0..survivors[k].len());
        let firm = survivors[k].swap_remove(slot);
        aggregate += env.class(k).alpha / n;
        events.push(DefaultEvent { time: t, firm });
    }

    Ok(EventLog {
        events,
        horizon,
        portfolio_id: portfolio.fingerprint(),
    })
}

/// Loss and per-class default fractions of one path sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub t_grid: Vec<f64>,
    /// `per_class_default_fraction[g][k]`.
    pub per_class_default_fraction: Vec<Vec<f64>>,
    /// `L^N(t) / N`.
    pub loss_fraction: Vec<f64>,
}

fn check_grid(t_grid: &[f64], horizon: f64) -> Result<(), CtmcError> {
    if t_grid.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(CtmcError::GridNotSorted);
    }
    if let Some(&t) = t_grid.iter().find(|&&t| !(0.0..=horizon).contains(&t)) {
        return Err(CtmcError::GridOutOfRange { t, horizon });
    }
    Ok(())
}

/// Evaluates the path as a right-continuous step function on `t_grid`.
///
/// A default at time `tau` is counted at every grid time `t >= tau`.
pub fn loss_process(
    log: &EventLog,
    portfolio: &Portfolio,
    t_grid: &[f64],
) -> Result<PathGrid, CtmcError> {
    if log.portfolio_id != portfolio.fingerprint() {
        return Err(CtmcError::PortfolioMismatch);
    }
    check_grid(t_grid, log.horizon)?;
    Ok(sample_path(log, portfolio, t_grid))
}

fn sample_path(log: &EventLog, portfolio: &Portfolio, t_grid: &[f64]) -> PathGrid {
    let env = portfolio.environment();
    let counts = portfolio.class_counts();
    let n = portfolio.n() as f64;
    let mut defaults = vec![0usize; env.len()];
    let mut loss = 0.0;
    let mut next = 0;

    let mut per_class = Vec::with_capacity(t_grid.len());
    let mut loss_fraction = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        while next < log.events.len() && log.events[next].time <= t {
            let k = portfolio.class_of()[log.events[next].firm];
            defaults[k] += 1;
            loss += env.class(k).exposure;
            next += 1;
        }
        per_class.push(
            defaults
                .iter()
                .zip(counts)
                .map(|(&d, &c)| if c == 0 { 0.0 } else { d as f64 / c as f64 })
                .collect(),
        );
        loss_fraction.push(loss / n);
    }
    PathGrid {
        t_grid: t_grid.to_vec(),
        per_class_default_fraction: per_class,
        loss_fraction,
    }
}

/// Empirical exceedance curve for one loss threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ExcessCurve {
    pub threshold: f64,
    /// Fraction of replicas with `L^N(t)/N >= threshold`, per grid time.
    pub probability: Vec<f64>,
}

/// Aggregate statistics over an ensemble of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub t_grid: Vec<f64>,
    pub mean_loss_fraction: Vec<f64>,
    /// Sample variance of `sqrt(N) * (L^N(t)/N - mean)`.
    pub var_scaled_loss: Vec<f64>,
    /// `mean_class_fractions[g][k]`.
    pub mean_class_fractions: Vec<Vec<f64>>,
    pub excess_prob_empirical: Vec<ExcessCurve>,
    pub replicas: usize,
    pub seed: u64,
}

/// Streaming accumulator of [`PathGrid`]s.
///
/// Loss moments use Welford updates; partial accumulators merge with the
/// Chan et al. pairwise formula. Results are deterministic as long as paths
/// are pushed and partials merged in a fixed order.
#[derive(Debug, Clone)]
pub struct EnsembleAccumulator {
    n_firms: usize,
    thresholds: Vec<f64>,
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
    class_sum: Vec<Vec<f64>>,
    exceed: Vec<Vec<u64>>,
}

impl EnsembleAccumulator {
    pub fn new(grid_len: usize, classes: usize, n_firms: usize, thresholds: &[f64]) -> Self {
        Self {
            n_firms,
            thresholds: thresholds.to_vec(),
            count: 0,
            mean: vec![0.0; grid_len],
            m2: vec![0.0; grid_len],
            class_sum: vec![vec![0.0; classes]; grid_len],
            exceed: vec![vec![0; grid_len]; thresholds.len()],
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, path: &PathGrid) {
        self.count += 1;
        let c = self.count as f64;
        for (g, &x) in path.loss_fraction.iter().enumerate() {
            let delta = x - self.mean[g];
            self.mean[g] += delta / c;
            self.m2[g] += delta * (x - self.mean[g]);
            for (s, f) in self.class_sum[g]
                .iter_mut()
                .zip(&path.per_class_default_fraction[g])
            {
                *s += f;
            }
            for (j, &thr) in self.thresholds.iter().enumerate() {
                if x >= thr {
                    self.exceed[j][g] += 1;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &EnsembleAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let total = na + nb;
        for g in 0..self.mean.len() {
            let delta = other.mean[g] - self.mean[g];
            self.mean[g] += delta * nb / total;
            self.m2[g] += other.m2[g] + delta * delta * na * nb / total;
            for (s, o) in self.class_sum[g].iter_mut().zip(&other.class_sum[g]) {
                *s += o;
            }
        }
        for (mine, theirs) in self.exceed.iter_mut().zip(&other.exceed) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
        self.count += other.count;
    }

    /// Finalizes the statistics. With a single path the variance is reported as 0.
    pub fn finish(self, t_grid: &[f64], seed: u64) -> EnsembleStats {
        let c = self.count.max(1) as f64;
        let n = self.n_firms as f64;
        let var_scaled_loss = self
            .m2
            .iter()
            .map(|m2| {
                if self.count < 2 {
                    0.0
                } else {
                    (n * m2 / (c - 1.0)).max(0.0)
                }
            })
            .collect();
        EnsembleStats {
            t_grid: t_grid.to_vec(),
            mean_loss_fraction: self.mean,
            var_scaled_loss,
            mean_class_fractions: self
                .class_sum
                .into_iter()
                .map(|row| row.into_iter().map(|s| s / c).collect())
                .collect(),
            excess_prob_empirical: self
                .thresholds
                .iter()
                .zip(self.exceed)
                .map(|(&threshold, hits)| ExcessCurve {
                    threshold,
                    probability: hits.into_iter().map(|h| h as f64 / c).collect(),
                })
                .collect(),
            replicas: self.count,
            seed,
        }
    }
}

/// Runs `replicas` independent paths and aggregates them on `t_grid`.
///
/// Replica `r` draws from stream `(seed, r)`. Replicas are processed in
/// fixed-size batches merged in index order, so the output is bitwise
/// identical for any rayon pool size.
pub fn monte_carlo(
    portfolio: &Portfolio,
    horizon: f64,
    t_grid: &[f64],
    replicas: usize,
    thresholds: &[f64],
    seed: u64,
) -> Result<EnsembleStats, CtmcError> {
    if replicas < 2 {
        return Err(CtmcError::TooFewReplicas {
            min: 2,
            got: replicas,
        });
    }
    ensemble(portfolio, horizon, t_grid, replicas, thresholds, seed)
}

/// [`monte_carlo`] without the two-replica minimum.
pub fn ensemble(
    portfolio: &Portfolio,
    horizon: f64,
    t_grid: &[f64],
    replicas: usize,
    thresholds: &[f64],
    seed: u64,
) -> Result<EnsembleStats, CtmcError> {
    if replicas == 0 {
        return Err(CtmcError::TooFewReplicas { min: 1, got: 0 });
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(CtmcError::InvalidHorizon(horizon));
    }
    check_grid(t_grid, horizon)?;
    let k = portfolio.environment().len();
    let n = portfolio.n();

    let partials: Vec<EnsembleAccumulator> = rng::batches(replicas)
        .into_par_iter()
        .map(|range| {
            let mut acc = EnsembleAccumulator::new(t_grid.len(), k, n, thresholds);
            for r in range {
                let mut rng = rng::stream(seed, r as u64);
                let log = simulate_path(portfolio, horizon, &mut rng)
                    .expect("horizon validated above");
                acc.push(&sample_path(&log, portfolio, t_grid));
            }
            acc
        })
        .collect();

    let mut total = EnsembleAccumulator::new(t_grid.len(), k, n, thresholds);
    for p in &partials {
        total.merge(p);
    }
    Ok(total.finish(t_grid, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_portfolio, AssignmentMode, Environment, FirmClass};
    use std::collections::HashSet;

    fn single(alpha: f64, beta: f64, gamma: f64, n: usize) -> Portfolio {
        let env = Environment::new(vec![FirmClass::new(alpha, beta, gamma, 1.0, 1.0)]).unwrap();
        build_portfolio(&env, n, AssignmentMode::DeterministicProportions, 0).unwrap()
    }

    fn scenario_b(n: usize) -> Portfolio {
        let env = Environment::new(vec![
            FirmClass::new(4.0, 4.0, 3.0, 1.0, 0.4),
            FirmClass::new(0.1, 0.1, 3.0, 1.0, 0.6),
        ])
        .unwrap();
        build_portfolio(&env, n, AssignmentMode::DeterministicProportions, 0).unwrap()
    }

    #[test]
    fn intensities_examples() {
        let p = single(4.0, 4.0, 3.0, 5);
        assert!(intensities(&p, &[true; 5]).unwrap().iter().all(|&r| r == 0.0));
        let r = intensities(&p, &[false; 5]).unwrap();
        assert!(r.iter().all(|&x| (x - 0.049787068367863944).abs() < 1e-15));

        let env = Environment::new(vec![
            FirmClass::new(1.0, 2.0, 0.0, 1.0, 0.5),
            FirmClass::new(1.0, 0.0, 0.0, 1.0, 0.5),
        ])
        .unwrap();
        // firm 0 in class 0 (beta=2), firm 1 in class 1 (beta=0) and defaulted
        let p = Portfolio::from_assignment(env, vec![0, 1]).unwrap();
        let r = intensities(&p, &[false, true]).unwrap();
        assert!((r[0] - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(r[1], 0.0);
        assert!(intensities(&p, &[false]).is_err());
    }

    #[test]
    fn path_invariants() {
        let p = scenario_b(125);
        for seed in 0..20 {
            let log = simulate_path(&p, 5.0, &mut rng::stream(seed, 0)).unwrap();
            assert!(log.events.windows(2).all(|w| w[0].time < w[1].time));
            assert!(log.events.iter().all(|e| e.time > 0.0 && e.time <= 5.0));
            let firms: HashSet<usize> = log.events.iter().map(|e| e.firm).collect();
            assert_eq!(firms.len(), log.events.len());
        }
    }

    #[test]
    fn path_is_reproducible() {
        let p = scenario_b(125);
        let a = simulate_path(&p, 5.0, &mut rng::stream(9, 3)).unwrap();
        let b = simulate_path(&p, 5.0, &mut rng::stream(9, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_validation() {
        let p = single(1.0, 1.0, 0.0, 10);
        assert_eq!(
            simulate_path(&p, 0.0, &mut rng::stream(0, 0)).unwrap_err(),
            CtmcError::InvalidHorizon(0.0)
        );
        let log = simulate_path(&p, 1e-9, &mut rng::stream(0, 0)).unwrap();
        assert!(log.events.is_empty());
    }

    #[test]
    fn everyone_eventually_defaults() {
        let p = single(1.0, 1.0, 0.0, 30);
        let log = simulate_path(&p, 1e6, &mut rng::stream(1, 0)).unwrap();
        assert_eq!(log.events.len(), 30);
    }

    #[test]
    fn single_firm_truncated_exponential_mean() {
        // E[min(tau, 10)] for tau ~ Exp(1) is 1 - e^{-10}
        let p = single(2.0, 3.0, 0.0, 1);
        let m = 100_000;
        let samples: Vec<f64> = (0..m)
            .map(|r| {
                let log = simulate_path(&p, 10.0, &mut rng::stream(5, r)).unwrap();
                log.events.first().map_or(10.0, |e| e.time)
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / m as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let expected = 1.0 - (-10.0f64).exp();
        assert!((mean - expected).abs() < 3.0 * (var / m as f64).sqrt());
    }

    #[test]
    fn loss_process_examples() {
        let p = single(1.0, 1.0, 0.0, 4);
        let empty = EventLog {
            events: vec![],
            horizon: 2.0,
            portfolio_id: p.fingerprint(),
        };
        let g = loss_process(&empty, &p, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(g.loss_fraction, vec![0.0; 3]);

        let log = EventLog {
            events: vec![
                DefaultEvent { time: 0.5, firm: 2 },
                DefaultEvent { time: 1.5, firm: 0 },
            ],
            horizon: 2.0,
            portfolio_id: p.fingerprint(),
        };
        let g = loss_process(&log, &p, &[1.0, 2.0]).unwrap();
        assert_eq!(g.loss_fraction, vec![0.25, 0.5]);
        // right-continuous: an event exactly on a grid point counts there
        let g = loss_process(&log, &p, &[0.5]).unwrap();
        assert_eq!(g.loss_fraction, vec![0.25]);

        assert_eq!(
            loss_process(&log, &p, &[0.0, 3.0]).unwrap_err(),
            CtmcError::GridOutOfRange { t: 3.0, horizon: 2.0 }
        );
        assert_eq!(
            loss_process(&log, &p, &[1.0, 0.5]).unwrap_err(),
            CtmcError::GridNotSorted
        );
        let other = single(1.0, 1.0, 0.0, 5);
        assert_eq!(
            loss_process(&log, &other, &[1.0]).unwrap_err(),
            CtmcError::PortfolioMismatch
        );
    }

    #[test]
    fn weighted_exposure_loss() {
        let env = Environment::new(vec![
            FirmClass::new(1.0, 0.0, 0.0, 2.0, 0.5),
            FirmClass::new(2.0, 0.0, 0.0, 1.0, 0.5),
        ])
        .unwrap();
        let p = build_portfolio(&env, 2, AssignmentMode::DeterministicProportions, 0).unwrap();
        let log = EventLog {
            events: vec![
                DefaultEvent { time: 0.1, firm: 1 },
                DefaultEvent { time: 0.2, firm: 0 },
            ],
            horizon: 1.0,
            portfolio_id: p.fingerprint(),
        };
        let g = loss_process(&log, &p, &[1.0]).unwrap();
        assert_eq!(g.loss_fraction, vec![1.5]);
        assert_eq!(g.per_class_default_fraction[0], vec![1.0, 1.0]);
    }

    #[test]
    fn empty_class_fraction_is_zero() {
        let env = Environment::new(vec![
            FirmClass::new(1.0, 0.0, 0.0, 1.0, 0.9),
            FirmClass::new(2.0, 0.0, 0.0, 1.0, 0.1),
        ])
        .unwrap();
        let p = Portfolio::from_assignment(env, vec![0, 0]).unwrap();
        let log = simulate_path(&p, 50.0, &mut rng::stream(0, 0)).unwrap();
        let g = loss_process(&log, &p, &[50.0]).unwrap();
        assert_eq!(g.per_class_default_fraction[0][1], 0.0);
    }

    #[test]
    fn duplicated_path_has_zero_variance() {
        let p = scenario_b(125);
        let grid: Vec<f64> = (0..=10).map(|g| g as f64 * 0.5).collect();
        let log = simulate_path(&p, 5.0, &mut rng::stream(3, 0)).unwrap();
        let path = loss_process(&log, &p, &grid).unwrap();
        let mut acc = EnsembleAccumulator::new(grid.len(), 2, 125, &[0.1]);
        acc.push(&path);
        acc.push(&path);
        let stats = acc.finish(&grid, 3);
        assert!(stats.var_scaled_loss.iter().all(|&v| v == 0.0));
        assert_eq!(stats.mean_loss_fraction, path.loss_fraction);
    }

    #[test]
    fn merge_matches_sequential_push() {
        let p = scenario_b(50);
        let grid: Vec<f64> = (0..=20).map(|g| g as f64 * 0.25).collect();
        let paths: Vec<PathGrid> = (0..40)
            .map(|r| {
                let log = simulate_path(&p, 5.0, &mut rng::stream(1, r)).unwrap();
                loss_process(&log, &p, &grid).unwrap()
            })
            .collect();
        let mut seq = EnsembleAccumulator::new(grid.len(), 2, 50, &[0.1, 0.2]);
        paths.iter().for_each(|x| seq.push(x));
        let mut a = EnsembleAccumulator::new(grid.len(), 2, 50, &[0.1, 0.2]);
        let mut b = a.clone();
        paths[..13].iter().for_each(|x| a.push(x));
        paths[13..].iter().for_each(|x| b.push(x));
        a.merge(&b);
        let (s, m) = (seq.finish(&grid, 0), a.finish(&grid, 0));
        for g in 0..grid.len() {
            assert!((s.mean_loss_fraction[g] - m.mean_loss_fraction[g]).abs() < 1e-14);
            assert!((s.var_scaled_loss[g] - m.var_scaled_loss[g]).abs() < 1e-12);
        }
        assert_eq!(s.excess_prob_empirical, m.excess_prob_empirical);
    }

    #[test]
    fn monte_carlo_requires_two_replicas() {
        let p = single(1.0, 0.0, 0.0, 10);
        assert_eq!(
            monte_carlo(&p, 1.0, &[1.0], 1, &[], 0).unwrap_err(),
            CtmcError::TooFewReplicas { min: 2, got: 1 }
        );
    }

    #[test]
    fn monte_carlo_matches_decoupled_closed_form() {
        let p = single(1.0, 0.0, 0.0, 125);
        let m = 10_000;
        let stats = monte_carlo(&p, 1.0, &[0.0, 0.5, 1.0], m, &[0.0, 0.5], 11).unwrap();
        let q = 1.0 - (-1.0f64).exp();
        let se = (q * (1.0 - q) / (125.0 * m as f64)).sqrt();
        assert!((stats.mean_loss_fraction[2] - q).abs() < 3.0 * se);
        assert_eq!(stats.mean_loss_fraction[0], 0.0);
        // x = 0 is always exceeded
        assert!(stats.excess_prob_empirical[0].probability.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn ensemble_statistics_invariants() {
        let p = scenario_b(125);
        let grid: Vec<f64> = (0..=25).map(|g| g as f64 * 0.2).collect();
        let stats = monte_carlo(&p, 5.0, &grid, 500, &[0.05, 0.15, 0.25], 2).unwrap();
        assert!(stats.var_scaled_loss.iter().all(|&v| v >= 0.0));
        for g in 0..grid.len() {
            let probs: Vec<f64> = stats
                .excess_prob_empirical
                .iter()
                .map(|c| c.probability[g])
                .collect();
            assert!(probs.windows(2).all(|w| w[0] >= w[1]));
            assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
            // conservation: weighted class fractions recover the loss with unit exposures
            let weighted: f64 = stats.mean_class_fractions[g]
                .iter()
                .zip(p.class_counts())
                .map(|(f, &c)| f * c as f64)
                .sum::<f64>()
                / 125.0;
            assert!((weighted - stats.mean_loss_fraction[g]).abs() < 1e-12);
        }
        assert!(stats.mean_loss_fraction.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn monotone_in_gamma_without_contagion() {
        let grid = [0.5, 1.0, 2.0];
        let m = 4000;
        let low = monte_carlo(&single(1.0, 0.0, 0.0, 100), 2.0, &grid, m, &[], 4).unwrap();
        let high = monte_carlo(&single(1.0, 0.0, 0.5, 100), 2.0, &grid, m, &[], 4).unwrap();
        for g in 0..grid.len() {
            let diff = low.mean_class_fractions[g][0] - high.mean_class_fractions[g][0];
            let se = ((low.var_scaled_loss[g] + high.var_scaled_loss[g]) / (100.0 * m as f64))
                .sqrt();
            assert!(diff > 3.0 * se, "t={} diff={diff} se={se}", grid[g]);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let p = scenario_b(125);
        let grid: Vec<f64> = (0..=10).map(|g| g as f64 * 0.5).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| monte_carlo(&p, 5.0, &grid, 1000, &[0.15], 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
