//! Heterogeneous environment of firm types and finite portfolios drawn from it.
//!
//! The environment is a finite mixture: each [`FirmClass`] is a support point
//! `(alpha, beta, gamma)` with a loss-given-default `exposure` and a mixture
//! `weight`. A [`Portfolio`] assigns each of `n` firms to one class.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Allowed deviation of the mixture weights from a total of one.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("environment must contain at least one class")]
    Empty,
    #[error("class {class}: weight {weight} must be positive")]
    NonPositiveWeight { class: usize, weight: f64 },
    #[error("weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOLERANCE:e}")]
    WeightsDoNotSumToOne { sum: f64 },
    #[error("class {class}: {field} = {value} must be nonnegative")]
    NegativeParameter {
        class: usize,
        field: &'static str,
        value: f64,
    },
    #[error("class {class}: {field} is not finite")]
    NonFiniteParameter { class: usize, field: &'static str },
    #[error("classes {first} and {second} share (alpha, beta, gamma) but differ in exposure")]
    ConflictingExposure { first: usize, second: usize },
    #[error("reciprocity violated: max |beta - b*alpha| = {max_residual}")]
    ReciprocityViolated { max_residual: f64 },
    #[error("every class has alpha = 0, no reciprocity constant exists")]
    AllAlphasZero,
    #[error("portfolio size must be at least 1")]
    EmptyPortfolio,
}

/// One support point of the environment law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmClass {
    /// Weight of a default of this class in the aggregate variable.
    pub alpha: f64,
    /// Sensitivity of the default rate to the aggregate variable.
    pub beta: f64,
    /// Idiosyncratic robustness; the isolated default rate is `exp(-gamma)`.
    pub gamma: f64,
    /// Loss on default, constant over the horizon.
    pub exposure: f64,
    /// Mixture probability.
    pub weight: f64,
}

impl FirmClass {
    pub fn new(alpha: f64, beta: f64, gamma: f64, exposure: f64, weight: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            exposure,
            weight,
        }
    }

    fn same_triple(&self, other: &FirmClass) -> bool {
        self.alpha == other.alpha && self.beta == other.beta && self.gamma == other.gamma
    }

    /// Default rate given the current value of the aggregate variable.
    #[inline]
    pub fn rate(&self, aggregate: f64) -> f64 {
        (self.beta * aggregate - self.gamma).exp()
    }
}

/// A validated finite mixture of firm classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Environment {
    classes: Vec<FirmClass>,
}

impl Environment {
    /// Validates `classes`, merging entries that share a parameter triple.
    pub fn new(classes: Vec<FirmClass>) -> Result<Self, ModelError> {
        validate_environment(classes)
    }

    pub fn classes(&self) -> &[FirmClass] {
        &self.classes
    }

    pub fn class(&self, k: usize) -> &FirmClass {
        &self.classes[k]
    }

    /// Number of classes `K`.
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Upper bound of the aggregate variable, `sum_k p_k alpha_k`.
    pub fn max_aggregate(&self) -> f64 {
        self.classes.iter().map(|c| c.weight * c.alpha).sum()
    }
}

/// Checks the law assumptions on a list of classes and returns an [`Environment`].
///
/// Classes with an identical `(alpha, beta, gamma)` are merged into the first
/// occurrence with their weights summed. Order is otherwise preserved.
pub fn validate_environment(classes: Vec<FirmClass>) -> Result<Environment, ModelError> {
    if classes.is_empty() {
        return Err(ModelError::Empty);
    }
    for (k, c) in classes.iter().enumerate() {
        for (field, value) in [
            ("alpha", c.alpha),
            ("beta", c.beta),
            ("gamma", c.gamma),
            ("exposure", c.exposure),
            ("weight", c.weight),
        ] {
            if !value.is_finite() {
                return Err(ModelError::NonFiniteParameter { class: k, field });
            }
        }
        for (field, value) in [("alpha", c.alpha), ("beta", c.beta), ("exposure", c.exposure)] {
            if value < 0.0 {
                return Err(ModelError::NegativeParameter {
                    class: k,
                    field,
                    value,
                });
            }
        }
        if c.weight <= 0.0 {
            return Err(ModelError::NonPositiveWeight {
                class: k,
                weight: c.weight,
            });
        }
    }

    let mut merged: Vec<FirmClass> = Vec::with_capacity(classes.len());
    let mut origin: Vec<usize> = Vec::with_capacity(classes.len());
    for (k, c) in classes.into_iter().enumerate() {
        match merged.iter().position(|m| m.same_triple(&c)) {
            Some(j) => {
                if merged[j].exposure != c.exposure {
                    return Err(ModelError::ConflictingExposure {
                        first: origin[j],
                        second: k,
                    });
                }
                merged[j].weight += c.weight;
            }
            None => {
                merged.push(c);
                origin.push(k);
            }
        }
    }

    let sum: f64 = merged.iter().map(|c| c.weight).sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(ModelError::WeightsDoNotSumToOne { sum });
    }
    Ok(Environment { classes: merged })
}

/// Evidence that `beta_k = b * alpha_k` holds across the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReciprocityCertificate {
    pub b: f64,
    pub max_residual: f64,
}

impl ReciprocityCertificate {
    /// Re-checks the certificate against `env`, allowing round-off on top of
    /// the recorded residual.
    pub fn holds_for(&self, env: &Environment) -> bool {
        env.classes().iter().all(|c| {
            let r = (c.beta - self.b * c.alpha).abs();
            r <= self.max_residual + 1e-12 * (1.0 + c.beta.abs())
        })
    }
}

/// Finds `b` with `beta_k = b * alpha_k` for every class, within `tol`.
///
/// `b` is read off the first class with a positive `alpha`.
pub fn check_reciprocity(
    env: &Environment,
    tol: f64,
) -> Result<ReciprocityCertificate, ModelError> {
    let first = env
        .classes()
        .iter()
        .find(|c| c.alpha > 0.0)
        .ok_or(ModelError::AllAlphasZero)?;
    let b = first.beta / first.alpha;
    let max_residual = env
        .classes()
        .iter()
        .map(|c| (c.beta - b * c.alpha).abs())
        .fold(0.0_f64, f64::max);
    // A class with alpha = 0 has residual |beta| so the rule above also
    // enforces beta <= tol there.
    if max_residual > tol {
        return Err(ModelError::ReciprocityViolated { max_residual });
    }
    Ok(ReciprocityCertificate { b, max_residual })
}

/// How firms are assigned to classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentMode {
    /// Class counts are the largest-remainder apportionment of `n * weight`.
    #[default]
    DeterministicProportions,
    /// Each firm's class is drawn independently from the weights.
    IidSample,
}

/// A concrete portfolio of `n` firms.
#[derive(Debug, Clone, PartialEq)]
pub struct Portfolio {
    environment: Environment,
    class_of: Vec<usize>,
    counts: Vec<usize>,
}

impl Portfolio {
    /// Builds a portfolio from an explicit assignment.
    pub fn from_assignment(
        environment: Environment,
        class_of: Vec<usize>,
    ) -> Result<Self, ModelError> {
        if class_of.is_empty() {
            return Err(ModelError::EmptyPortfolio);
        }
        let mut counts = vec![0; environment.len()];
        for &k in &class_of {
            assert!(k < environment.len(), "class index {k} out of range");
            counts[k] += 1;
        }
        Ok(Self {
            environment,
            class_of,
            counts,
        })
    }

    pub fn n(&self) -> usize {
        self.class_of.len()
    }

    pub fn environment(&self) -> &Environment {
        &self.environment
    }

    pub fn class_of(&self) -> &[usize] {
        &self.class_of
    }

    /// Number of firms in each class.
    pub fn class_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn class_of_firm(&self, firm: usize) -> &FirmClass {
        self.environment.class(self.class_of[firm])
    }

    /// Stable identity of the portfolio, used to tie event logs to it.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.class_of.hash(&mut h);
        for c in self.environment.classes() {
            for v in [c.alpha, c.beta, c.gamma, c.exposure, c.weight] {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }
}

/// Largest-remainder apportionment of `n` over `weights`; ties go to the lower index.
pub fn largest_remainder(n: usize, weights: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = weights.iter().map(|w| w * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    // stable sort keeps lower indices first among equal remainders
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    let mut left = n.saturating_sub(assigned);
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Materializes a size-`n` portfolio. Pure in `(env, n, mode, seed)`.
pub fn build_portfolio(
    env: &Environment,
    n: usize,
    mode: AssignmentMode,
    seed: u64,
) -> Result<Portfolio, ModelError> {
    if n == 0 {
        return Err(ModelError::EmptyPortfolio);
    }
    let class_of = match mode {
        AssignmentMode::DeterministicProportions => {
            let weights: Vec<f64> = env.classes().iter().map(|c| c.weight).collect();
            largest_remainder(n, &weights)
                .into_iter()
                .enumerate()
                .flat_map(|(k, count)| std::iter::repeat_n(k, count))
                .collect()
        }
        AssignmentMode::IidSample => {
            let mut rng = rng::stream(seed, rng::PORTFOLIO_STREAM);
            (0..n).map(|_| sample_class(env, rng.random())).collect()
        }
    };
    Portfolio::from_assignment(env.clone(), class_of)
}

/// Class index for a uniform draw `u` in `[0, 1)` by inverse CDF over the weights.
pub(crate) fn sample_class(env: &Environment, u: f64) -> usize {
    let mut acc = 0.0;
    for (k, c) in env.classes().iter().enumerate() {
        acc += c.weight;
        if u < acc {
            return k;
        }
    }
    env.len() - 1
}
