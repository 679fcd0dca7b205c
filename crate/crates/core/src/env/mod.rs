//! Hedging environments.
//!
//! The environments replay pre-generated market and client-flow data through
//! a step/reset state machine with exact PNL decomposition:
//!
//! ```text
//! net_pnl = client_spread_pnl + hedge_spread_pnl + market_reval_pnl
//! ```
//!
//! Every trade of signed size q at price p books spread PNL `q·(mid − p)`,
//! and the held position books `net_position·Δmid` per step, so the
//! decomposition equals a mark-to-market blotter (`cash + position·mid`)
//! identically.

mod single;
pub mod portfolio;

pub use portfolio::{PortfolioConfig, PortfolioEnv};
pub use single::HedgeEnv;


use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowConfig;
use crate::market::MarketConfig;

/// Single-asset environment variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Hedge-size action only.
    Single,
    /// Hedge size plus skew; skew moves client quotes and attracts flow.
    Skew,
    /// Hedge size plus skew with non-elastic flow; reward targets flat
    /// spread PNL so client spreads converge onto hedge spreads.
    PriceOfRisk,
}

impl Mode {
    pub fn has_skew(self) -> bool {
        !matches!(self, Mode::Single)
    }

    pub fn action_dim(self) -> usize {
        if self.has_skew() {
            2
        } else {
            1
        }
    }
}

/// Single-asset environment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub mode: Mode,
    /// Per-step hedge size bound (action space half-width).
    pub max_hedge_size: f64,
    /// Position scale of the penalty spring.
    pub max_pos_limit: f64,
    /// Penalty scale γ.
    pub gamma_penalty: f64,
    /// Episode terminates when |position| exceeds this multiple of
    /// `max_pos_limit`.
    pub termination_multiple: f64,
    /// Extra reward charge on a terminal breach.
    pub terminal_extra_penalty: f64,
    /// Restore the literal first term `max(−|client+hedge|, 0)` (identically
    /// zero) of the price-of-risk reward instead of the default `−|client+hedge|`.
    pub literal_price_of_risk: bool,
    /// Rolling window (steps) for maker/taker spread statistics.
    pub maker_taker_window: usize,
    pub market: MarketConfig,
    pub flow: FlowConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        let market = MarketConfig::default();
        let gamma_penalty = 0.1;
        let max_pos_limit = 50.0;
        let termination_multiple = 2.0;
        EnvConfig {
            mode: Mode::Single,
            max_hedge_size: 10.0,
            max_pos_limit,
            gamma_penalty,
            termination_multiple,
            // Penalty evaluated at the breach boundary.
            terminal_extra_penalty: gamma_penalty
                * market.s0
                * (termination_multiple.exp() - 1.0)
                * max_pos_limit,
            literal_price_of_risk: false,
            maker_taker_window: 20,
            market,
            flow: FlowConfig::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.flow.validate()?;
        if !(self.max_hedge_size > 0.0) {
            return Err(Error::Config(format!(
                "env.max_hedge_size must be > 0, got {}",
                self.max_hedge_size
            )));
        }
        if !(self.max_pos_limit > 0.0) {
            return Err(Error::Config(format!(
                "env.max_pos_limit must be > 0, got {}",
                self.max_pos_limit
            )));
        }
        if !(self.termination_multiple > 1.0) {
            return Err(Error::Config(format!(
                "env.termination_multiple must be > 1, got {}",
                self.termination_multiple
            )));
        }
        if !(self.terminal_extra_penalty >= 0.0) {
            return Err(Error::Config("env.terminal_extra_penalty must be >= 0".into()));
        }
        if self.maker_taker_window < 1 {
            return Err(Error::Config("env.maker_taker_window must be >= 1".into()));
        }
        Ok(())
    }

    /// Copy with cross-field rules applied: the env's hedge-size bound is the
    /// master copy of the shared field, and price-of-risk mode forces
    /// non-elastic client flow (β_skew = 0).
    pub fn normalized(&self) -> Self {
        let mut cfg = self.clone();
        cfg.flow.max_hedge_size = cfg.max_hedge_size;
        if cfg.mode == Mode::PriceOfRisk {
            cfg.flow.beta_skew = 0.0;
        }
        cfg
    }
}

/// Bounded agent action; `skew` is ignored by `Mode::Single`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgentAction {
    pub hedge_size: f64,
    pub skew: f64,
}

impl AgentAction {
    /// Clip to bounds; the flag reports whether clipping changed anything.
    pub fn clipped(hedge_size: f64, skew: f64, max_hedge_size: f64) -> (Self, bool) {
        let h = hedge_size.clamp(-max_hedge_size, max_hedge_size);
        let s = skew.clamp(-1.0, 1.0);
        (AgentAction { hedge_size: h, skew: s }, h != hedge_size || s != skew)
    }
}

/// One step's PNL decomposition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PnlBreakdown {
    pub client_spread_pnl: f64,
    pub hedge_spread_pnl: f64,
    pub market_reval_pnl: f64,
}

impl PnlBreakdown {
    pub fn total(&self) -> f64 {
        self.client_spread_pnl + self.hedge_spread_pnl + self.market_reval_pnl
    }
}

/// Mutable environment core: positions, cumulative PNL components, history.
#[derive(Debug, Clone, Default)]
pub struct HedgerState {
    pub t: usize,
    pub client_position: f64,
    pub hedge_position: f64,
    pub client_pnl: f64,
    pub hedge_pnl: f64,
    pub market_pnl: f64,
    pub history: Vec<PnlBreakdown>,
    pub done: bool,
}

impl HedgerState {
    pub fn net_position(&self) -> f64 {
        self.client_position + self.hedge_position
    }

    /// Identity, not bookkeeping: the components are the only stores.
    pub fn net_pnl(&self) -> f64 {
        self.client_pnl + self.hedge_pnl + self.market_pnl
    }
}

/// `γ·S0·(e^{|position|/MaxPosLimit} − 1)·MaxPosLimit` — the inventory
/// "spring".
pub fn position_penalty(position: f64, cfg: &EnvConfig) -> f64 {
    cfg.gamma_penalty
        * cfg.market.s0
        * ((position.abs() / cfg.max_pos_limit).exp() - 1.0)
        * cfg.max_pos_limit
}

/// `client + hedge + market − penalty`.
pub fn reward_single(pnl: &PnlBreakdown, penalty: f64) -> f64 {
    pnl.total() - penalty
}

/// Price-of-risk reward. Default form `−|client+hedge| + market − penalty`
/// penalizes any imbalance between spread earned and spread paid; the
/// literal flag replaces the first term with `max(−|client+hedge|, 0)`,
/// which is identically zero.
pub fn reward_price_of_risk(pnl: &PnlBreakdown, penalty: f64, literal: bool) -> f64 {
    let imbalance = pnl.client_spread_pnl + pnl.hedge_spread_pnl;
    let first = if literal { (-imbalance.abs()).max(0.0) } else { -imbalance.abs() };
    first + pnl.market_reval_pnl - penalty
}

/// Offset the previously accrued position, clipped to the hedge bound.
pub fn heuristic_action(state: &HedgerState, cfg: &EnvConfig) -> AgentAction {
    let h = (-state.net_position()).clamp(-cfg.max_hedge_size, cfg.max_hedge_size);
    AgentAction { hedge_size: h, skew: 0.0 }
}

/// Scalar observation: net position scaled by `1/MaxPosLimit`.
pub fn observation(state: &HedgerState, cfg: &EnvConfig) -> f64 {
    state.net_position() / cfg.max_pos_limit
}

/// Rolling size-weighted per-unit spreads: received from clients (maker)
/// and paid to the hedge venue (taker). A side with no traded size inside
/// the window is undefined.
#[derive(Debug, Clone)]
pub struct MakerTakerTracker {
    window: usize,
    /// Per-step (traded size, spread notional) pairs.
    client: Vec<(f64, f64)>,
    hedge: Vec<(f64, f64)>,
}

impl MakerTakerTracker {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1);
        MakerTakerTracker { window, client: Vec::new(), hedge: Vec::new() }
    }

    pub fn push_step(&mut self, client_size: f64, client_notional: f64, hedge_size: f64, hedge_notional: f64) {
        self.client.push((client_size, client_notional));
        self.hedge.push((hedge_size, hedge_notional));
    }

    fn rolling(events: &[(f64, f64)], window: usize) -> Option<f64> {
        let tail = &events[events.len().saturating_sub(window)..];
        let size: f64 = tail.iter().map(|e| e.0).sum();
        if size == 0.0 {
            return None;
        }
        Some(tail.iter().map(|e| e.1).sum::<f64>() / size)
    }

    /// Rolling mean per-unit spread charged to clients.
    pub fn maker(&self) -> Option<f64> {
        Self::rolling(&self.client, self.window)
    }

    /// Rolling mean per-unit spread paid on hedges.
    pub fn taker(&self) -> Option<f64> {
        Self::rolling(&self.hedge, self.window)
    }

    pub fn clear(&mut self) {
        self.client.clear();
        self.hedge.clear();
    }
}

/// Per-step episode record; one CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub mid: f64,
    /// Quotes actually shown to clients (skew-adjusted in skew modes).
    pub client_bid: f64,
    pub client_ask: f64,
    pub hedge_bid: f64,
    pub hedge_ask: f64,
    pub client_bid_size: f64,
    pub client_ask_size: f64,
    pub action_hedge: f64,
    pub action_skew: f64,
    pub client_pos: f64,
    pub hedge_pos: f64,
    pub net_pos: f64,
    /// Cumulative PNL components after this step.
    pub client_pnl: f64,
    pub hedge_pnl: f64,
    pub market_pnl: f64,
    pub net_pnl: f64,
    pub penalty: f64,
    pub reward: f64,
    pub done: bool,
    /// Rolling maker/taker spreads (price-of-risk mode export only).
    pub maker_spread: Option<f64>,
    pub taker_spread: Option<f64>,
}

/// Step outcome shared by all environments.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub obs: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    /// Episode ended by horizon, not by a position breach; time-limit ends
    /// are bootstrapped as non-terminal by the trainer.
    pub timeout: bool,
    /// Magnitude used for the mean-|position| metric.
    pub abs_position: f64,
}

/// Uniform interface the trainer drives. Implementations are single-writer
/// state machines; parallel use requires independent instances.
pub trait Environment {
    fn obs_dim(&self) -> usize;
    fn act_dim(&self) -> usize;
    /// Per-dimension (lo, hi) action bounds.
    fn bounds(&self) -> Vec<(f64, f64)>;
    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;
    fn step(&mut self, action: &[f64]) -> Result<StepOutcome>;
    /// Steps per episode when no breach occurs.
    fn horizon(&self) -> usize;
}
