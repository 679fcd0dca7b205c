//! Market-making reinforcement-learning laboratory.
//!
//! A seeded stochastic market simulator with client trade flow, a family of
//! hedging environments with exact PNL accounting and penalty-shaped rewards,
//! a self-contained soft actor-critic trainer, and experiment plumbing for
//! training, evaluation, comparison, and dashboard export.
//!
//! - [`market`] — mid-price paths, rolling volatility, two-venue spreads.
//! - [`flow`] — Poisson client trade flow and the skew elasticity model.
//! - [`env`] — single-asset and two-asset portfolio hedging environments.
//! - [`sac`] — soft actor-critic with internal reverse-mode gradients.
//! - [`metrics`] — Sharpe ratio and evaluation summaries.

pub mod config;
pub mod env;
pub mod error;
pub mod export;
pub mod flow;
pub mod market;
pub mod metrics;
pub mod rng;
pub mod runner;
pub mod sac;

pub use config::{ExperimentConfig, ExperimentMode};
pub use env::{EnvConfig, Environment, HedgeEnv, Mode, PortfolioConfig, PortfolioEnv};
pub use error::{Error, Result};
pub use market::{MarketConfig, MarketPath};
