//! Credit contagion laboratory.
//!
//! Simulates a portfolio of `N` firms whose default rates rise with the
//! impact-weighted fraction of firms that have already defaulted, solves the
//! deterministic large-portfolio limit of that system, and approximates loss
//! distributions with a Gaussian whose variance accounts for contagion.
//!
//! - [`model`]: firm types, the mixture environment, portfolios.
//! - [`ctmc`]: exact finite-`N` simulation and ensemble statistics.
//! - [`limit`]: the mean-field limit equation and its default-time sampler.
//! - [`clt`]: limit variance of the loss and excess-loss probabilities.
//! - [`config`] and [`run`]: scenario files and the report-writing subcommands.

pub mod clt;
pub mod config;
pub mod ctmc;
pub mod limit;
pub mod model;
pub mod rng;
pub mod run;

pub use clt::{
    excess_curve, excess_prob, mc_validate_covdiag, variance_horizon, CltError, CovDiagEstimate,
    VarianceReport,
};
pub use config::{parse_config, ConfigError, ScenarioConfig};
pub use ctmc::{
    intensities, loss_process, monte_carlo, simulate_path, CtmcError, EnsembleStats, EventLog,
    PathGrid,
};
pub use limit::{
    limit_loss, sample_limit_default_time, solve_limit, LimitDefault, LimitError, LimitSolution,
};
pub use model::{
    build_portfolio, check_reciprocity, validate_environment, AssignmentMode, Environment,
    FirmClass, ModelError, Portfolio, ReciprocityCertificate,
};
pub use run::{Command, RunError, RunManifest};
