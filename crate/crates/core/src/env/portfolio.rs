//! Two-asset portfolio environment: blended client prices and flows,
//! per-asset hedging, portfolio value, and the over-hedge penalty.
//!
//! ```text
//! blended_x        = w·x¹ + (1−w)·x²          (mid, bid, ask, sizes)
//! portfolio_value  = blended_mid·pos_client + mid¹·pos_h1 + mid²·pos_h2
//! penalty          = γ·S0·(e^{(|pv| + φ·|overhedge|)/(S0·L)} − 1)·L
//! ```
//!
//! The same event order as the single-asset environment applies; client
//! fills arrive at blended quotes, each hedge executes at its own asset's
//! venue. Values (positions × mids) are marked at the post-move mids, which
//! is what the observation reports.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{generate_flow, FlowConfig, FlowPath};
use crate::market::{generate_market_pair, MarketConfig, MarketPath};

use super::{Environment, StepOutcome, StepRecord};

/// Two-asset portfolio configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioConfig {
    /// Blend weight on asset 1.
    pub w: f64,
    /// Log-increment correlation between the two assets.
    pub rho: f64,
    /// Over-hedge tolerance constant φ.
    pub phi: f64,
    /// Penalty scale γ.
    pub gamma_penalty: f64,
    pub max_pos_limit: f64,
    pub max_hedge_size: f64,
    /// Action space: (weight, amount) instead of raw per-asset amounts.
    pub convex_parametrization: bool,
    /// Episode terminates when |portfolio value| exceeds this multiple of
    /// `S0·max_pos_limit`.
    pub termination_multiple: f64,
    pub terminal_extra_penalty: f64,
    pub market1: MarketConfig,
    pub market2: MarketConfig,
    pub flow1: FlowConfig,
    pub flow2: FlowConfig,
}

impl Default for PortfolioConfig {
    fn default() -> Self {
        let market = MarketConfig::default();
        let gamma_penalty = 0.1;
        let max_pos_limit = 50.0;
        let termination_multiple = 2.0;
        PortfolioConfig {
            w: 0.5,
            rho: 0.0,
            phi: 1.0,
            gamma_penalty,
            max_pos_limit,
            max_hedge_size: 10.0,
            convex_parametrization: false,
            termination_multiple,
            terminal_extra_penalty: gamma_penalty
                * market.s0
                * (termination_multiple.exp() - 1.0)
                * max_pos_limit,
            market1: market.clone(),
            market2: market,
            flow1: FlowConfig::default(),
            flow2: FlowConfig::default(),
        }
    }
}

impl PortfolioConfig {
    pub fn validate(&self) -> Result<()> {
        self.market1.validate()?;
        self.market2.validate()?;
        self.flow1.validate()?;
        self.flow2.validate()?;
        if !(0.0..=1.0).contains(&self.w) {
            return Err(Error::Config(format!("portfolio.w must be in [0, 1], got {}", self.w)));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(Error::Config(format!(
                "portfolio.rho must satisfy |rho| <= 1, got {}",
                self.rho
            )));
        }
        if !(self.phi >= 0.0) {
            return Err(Error::Config(format!("portfolio.phi must be >= 0, got {}", self.phi)));
        }
        if !(self.max_pos_limit > 0.0) || !(self.max_hedge_size > 0.0) {
            return Err(Error::Config("portfolio position/hedge bounds must be > 0".into()));
        }
        if !(self.termination_multiple > 1.0) {
            return Err(Error::Config("portfolio.termination_multiple must be > 1".into()));
        }
        if self.market1.n_steps != self.market2.n_steps {
            return Err(Error::Config("portfolio assets must share n_steps".into()));
        }
        Ok(())
    }

    /// Blended initial price; the value scale of penalty and observation.
    pub fn s0_blend(&self) -> f64 {
        self.w * self.market1.s0 + (1.0 - self.w) * self.market2.s0
    }
}

/// `w·s1 + (1−w)·s2` — applied to mid, bid, and ask series alike.
pub fn blend_prices(s1: f64, s2: f64, w: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Param(format!("blend weight must be in [0, 1], got {w}")));
    }
    Ok(w * s1 + (1.0 - w) * s2)
}

/// Convex combination of the two assets' client flows; fractional sizes
/// are expected post-blend.
pub fn blend_sizes(f1: f64, f2: f64, w: f64) -> Result<f64> {
    blend_prices(f1, f2, w)
}

/// `blended_mid·client_pos + mid1·hedge1 + mid2·hedge2`.
pub fn portfolio_value(
    client_pos: f64,
    hedge1_pos: f64,
    hedge2_pos: f64,
    mid1: f64,
    mid2: f64,
    blended_mid: f64,
) -> f64 {
    blended_mid * client_pos + mid1 * hedge1_pos + mid2 * hedge2_pos
}

/// Per-asset over-hedge charge. A hedge that shares the client value's sign
/// is leverage (`|hv + cv|`); an offsetting hedge is charged only for its
/// overshoot beyond the client value.
pub fn overhedge(hedge_value: f64, client_pos_value: f64) -> f64 {
    if hedge_value * client_pos_value > 0.0 {
        (hedge_value + client_pos_value).abs()
    } else {
        (hedge_value.abs() - client_pos_value.abs()).max(0.0)
    }
}

/// `γ·S0·(e^{(|pv| + φ·|overhedge|)/(S0·MaxPosLimit)} − 1)·MaxPosLimit`.
pub fn portfolio_penalty(pv: f64, overhedge_total: f64, cfg: &PortfolioConfig) -> f64 {
    let s0 = cfg.s0_blend();
    let exponent = (pv.abs() + cfg.phi * overhedge_total.abs()) / (s0 * cfg.max_pos_limit);
    cfg.gamma_penalty * s0 * (exponent.exp() - 1.0) * cfg.max_pos_limit
}

/// `(w·amount, (1−w)·amount)` — the convex two-asset action parametrization.
pub fn convex_action_map(w_action: f64, amount: f64) -> (f64, f64) {
    debug_assert!((0.0..=1.0).contains(&w_action), "weight action must be in [0, 1]");
    (w_action * amount, (1.0 - w_action) * amount)
}

/// Sum of the three position PNLs minus the penalty.
pub fn reward_portfolio(client_pnl: f64, hedge1_pnl: f64, hedge2_pnl: f64, penalty: f64) -> f64 {
    client_pnl + hedge1_pnl + hedge2_pnl - penalty
}

/// Portfolio state: blended client position, per-asset hedge positions, and
/// cumulative PNL split by position and by spread/revaluation.
#[derive(Debug, Clone, Default)]
pub struct PortfolioState {
    pub t: usize,
    pub client_position: f64,
    pub hedge1_position: f64,
    pub hedge2_position: f64,
    pub client_spread_pnl: f64,
    pub hedge1_spread_pnl: f64,
    pub hedge2_spread_pnl: f64,
    pub client_reval_pnl: f64,
    pub hedge1_reval_pnl: f64,
    pub hedge2_reval_pnl: f64,
    pub done: bool,
}

impl PortfolioState {
    /// Full per-position PNLs (spread + own revaluation).
    pub fn client_pnl(&self) -> f64 {
        self.client_spread_pnl + self.client_reval_pnl
    }

    pub fn hedge1_pnl(&self) -> f64 {
        self.hedge1_spread_pnl + self.hedge1_reval_pnl
    }

    pub fn hedge2_pnl(&self) -> f64 {
        self.hedge2_spread_pnl + self.hedge2_reval_pnl
    }

    pub fn net_pnl(&self) -> f64 {
        self.client_pnl() + self.hedge1_pnl() + self.hedge2_pnl()
    }
}

/// Episode record row: the single-asset schema over blended series plus the
/// per-asset extension columns.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioRecord {
    pub base: StepRecord,
    pub mid1: f64,
    pub mid2: f64,
    pub blended_mid: f64,
    pub hedge1_pos: f64,
    pub hedge2_pos: f64,
    pub hedge1_pnl: f64,
    pub hedge2_pnl: f64,
    pub portfolio_value: f64,
    pub overhedge: f64,
}

pub struct PortfolioEnv {
    cfg: PortfolioConfig,
    m1: MarketPath,
    m2: MarketPath,
    f1: FlowPath,
    f2: FlowPath,
    state: PortfolioState,
    records: Vec<PortfolioRecord>,
}

impl PortfolioEnv {
    pub fn new(cfg: &PortfolioConfig) -> Result<Self> {
        cfg.validate()?;
        let seed = cfg.market1.seed;
        let (m1, m2) = generate_market_pair(&cfg.market1, &cfg.market2, cfg.rho)?;
        let f1 = generate_flow(&cfg.flow1, &m1, seed, 0)?;
        let f2 = generate_flow(&cfg.flow2, &m2, seed, 1)?;
        Ok(PortfolioEnv {
            cfg: cfg.clone(),
            m1,
            m2,
            f1,
            f2,
            state: PortfolioState::default(),
            records: Vec::new(),
        })
    }

    /// Replay injected paths (testing and data-replay harnesses).
    pub fn with_paths(
        cfg: &PortfolioConfig,
        m1: MarketPath,
        m2: MarketPath,
        f1: FlowPath,
        f2: FlowPath,
    ) -> Result<Self> {
        cfg.validate()?;
        let n = m1.n_steps();
        if m2.n_steps() != n || f1.bid_size.len() != n || f2.bid_size.len() != n {
            return Err(Error::Param("portfolio paths must align".into()));
        }
        Ok(PortfolioEnv {
            cfg: cfg.clone(),
            m1,
            m2,
            f1,
            f2,
            state: PortfolioState::default(),
            records: Vec::new(),
        })
    }

    fn regenerate(&mut self, seed: u64) -> Result<()> {
        let mut mc1 = self.cfg.market1.clone();
        mc1.seed = seed;
        let (m1, m2) = generate_market_pair(&mc1, &self.cfg.market2, self.cfg.rho)?;
        self.f1 = generate_flow(&self.cfg.flow1, &m1, seed, 0)?;
        self.f2 = generate_flow(&self.cfg.flow2, &m2, seed, 1)?;
        self.m1 = m1;
        self.m2 = m2;
        self.state = PortfolioState::default();
        self.records.clear();
        Ok(())
    }

    pub fn cfg(&self) -> &PortfolioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &PortfolioState {
        &self.state
    }

    pub fn records(&self) -> &[PortfolioRecord] {
        &self.records
    }

    pub fn markets(&self) -> (&MarketPath, &MarketPath) {
        (&self.m1, &self.m2)
    }

    fn blended_mid(&self, t: usize) -> f64 {
        self.cfg.w * self.m1.mid[t] + (1.0 - self.cfg.w) * self.m2.mid[t]
    }

    /// (hedge1 value, hedge2 value, portfolio value) at step `t` mids.
    fn values_at(&self, t: usize) -> (f64, f64, f64) {
        let h1v = self.m1.mid[t] * self.state.hedge1_position;
        let h2v = self.m2.mid[t] * self.state.hedge2_position;
        let pv = self.blended_mid(t) * self.state.client_position + h1v + h2v;
        (h1v, h2v, pv)
    }

    pub fn observation_vec(&self) -> Vec<f64> {
        let (h1v, h2v, pv) = self.values_at(self.state.t);
        let scale = self.cfg.s0_blend() * self.cfg.max_pos_limit;
        vec![h1v / scale, h2v / scale, pv / scale]
    }

    /// Step with raw per-asset hedge amounts (post-mapping, pre-clip).
    pub fn step_amounts(&mut self, hedge1: f64, hedge2: f64) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::State("step called on a finished episode".into()));
        }
        let t = self.state.t;
        let w = self.cfg.w;
        let b = self.cfg.max_hedge_size;
        let (h1, h2) = (hedge1.clamp(-b, b), hedge2.clamp(-b, b));

        // Client fills at blended quotes.
        let bl_mid = self.blended_mid(t);
        let bl_bid = blend_prices(self.m1.client_bid[t], self.m2.client_bid[t], w)?;
        let bl_ask = blend_prices(self.m1.client_ask[t], self.m2.client_ask[t], w)?;
        let bid_size = blend_sizes(self.f1.bid_size[t], self.f2.bid_size[t], w)?;
        let ask_size = blend_sizes(self.f1.ask_size[t], self.f2.ask_size[t], w)?;
        self.state.client_position += bid_size - ask_size;
        let client_spread = bid_size * (bl_mid - bl_bid) + ask_size * (bl_ask - bl_mid);
        self.state.client_spread_pnl += client_spread;

        // Per-asset hedges at their own venues.
        let spread_of = |h: f64, m: &MarketPath| {
            if h > 0.0 {
                h * (m.mid[t] - m.hedge_ask[t])
            } else if h < 0.0 {
                h * (m.mid[t] - m.hedge_bid[t])
            } else {
                0.0
            }
        };
        let h1_spread = spread_of(h1, &self.m1);
        let h2_spread = spread_of(h2, &self.m2);
        self.state.hedge1_position += h1;
        self.state.hedge2_position += h2;
        self.state.hedge1_spread_pnl += h1_spread;
        self.state.hedge2_spread_pnl += h2_spread;

        // Market move t → t+1 revalues every position at its own mid.
        let client_reval = self.state.client_position * (self.blended_mid(t + 1) - bl_mid);
        let h1_reval = self.state.hedge1_position * (self.m1.mid[t + 1] - self.m1.mid[t]);
        let h2_reval = self.state.hedge2_position * (self.m2.mid[t + 1] - self.m2.mid[t]);
        self.state.client_reval_pnl += client_reval;
        self.state.hedge1_reval_pnl += h1_reval;
        self.state.hedge2_reval_pnl += h2_reval;

        // Penalty on the post-move values.
        let (h1v, h2v, pv) = self.values_at(t + 1);
        let cv = self.blended_mid(t + 1) * self.state.client_position;
        let oh = overhedge(h1v, cv) + overhedge(h2v, cv);
        let penalty = portfolio_penalty(pv, oh, &self.cfg);
        let mut reward = reward_portfolio(
            client_spread + client_reval,
            h1_spread + h1_reval,
            h2_spread + h2_reval,
            penalty,
        );
        let breach_limit = self.cfg.termination_multiple * self.cfg.s0_blend() * self.cfg.max_pos_limit;
        let breached = pv.abs() > breach_limit;
        if breached {
            reward -= self.cfg.terminal_extra_penalty;
        }

        self.state.t = t + 1;
        let timeout = !breached && self.state.t + 1 == self.m1.n_steps();
        self.state.done = breached || timeout;

        self.records.push(PortfolioRecord {
            base: StepRecord {
                step: t,
                mid: bl_mid,
                client_bid: bl_bid,
                client_ask: bl_ask,
                hedge_bid: blend_prices(self.m1.hedge_bid[t], self.m2.hedge_bid[t], w)?,
                hedge_ask: blend_prices(self.m1.hedge_ask[t], self.m2.hedge_ask[t], w)?,
                client_bid_size: bid_size,
                client_ask_size: ask_size,
                action_hedge: h1 + h2,
                action_skew: 0.0,
                client_pos: self.state.client_position,
                hedge_pos: self.state.hedge1_position + self.state.hedge2_position,
                net_pos: self.state.client_position
                    + self.state.hedge1_position
                    + self.state.hedge2_position,
                client_pnl: self.state.client_spread_pnl,
                hedge_pnl: self.state.hedge1_spread_pnl + self.state.hedge2_spread_pnl,
                market_pnl: self.state.client_reval_pnl
                    + self.state.hedge1_reval_pnl
                    + self.state.hedge2_reval_pnl,
                net_pnl: self.state.net_pnl(),
                penalty,
                reward,
                done: self.state.done,
                maker_spread: None,
                taker_spread: None,
            },
            mid1: self.m1.mid[t],
            mid2: self.m2.mid[t],
            blended_mid: bl_mid,
            hedge1_pos: self.state.hedge1_position,
            hedge2_pos: self.state.hedge2_position,
            hedge1_pnl: self.state.hedge1_pnl(),
            hedge2_pnl: self.state.hedge2_pnl(),
            portfolio_value: pv,
            overhedge: oh,
        });

        Ok(StepOutcome {
            obs: self.observation_vec(),
            reward,
            done: self.state.done,
            timeout,
            abs_position: pv.abs() / self.cfg.s0_blend(),
        })
    }
}

impl Environment for PortfolioEnv {
    fn obs_dim(&self) -> usize {
        3
    }

    fn act_dim(&self) -> usize {
        2
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let b = self.cfg.max_hedge_size;
        if self.cfg.convex_parametrization {
            vec![(0.0, 1.0), (-b, b)]
        } else {
            vec![(-b, b), (-b, b)]
        }
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.regenerate(seed)?;
        Ok(self.observation_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != 2 {
            return Err(Error::Param(format!(
                "portfolio action has {} dims, expected 2",
                action.len()
            )));
        }
        if self.cfg.convex_parametrization {
            let w_action = action[0].clamp(0.0, 1.0);
            let amount = action[1].clamp(-self.cfg.max_hedge_size, self.cfg.max_hedge_size);
            let (h1, h2) = convex_action_map(w_action, amount);
            self.step_amounts(h1, h2)
        } else {
            self.step_amounts(action[0], action[1])
        }
    }

    fn horizon(&self) -> usize {
        self.m1.n_steps() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    fn test_cfg() -> PortfolioConfig {
        let mut cfg = PortfolioConfig::default();
        for f in [&mut cfg.flow1, &mut cfg.flow2] {
            f.c_scale = 10.0;
            f.beta_flow = 0.15;
        }
        cfg
    }

    #[test]
    fn blend_prices_hand_values() {
        assert_eq!(blend_prices(100.0, 102.0, 1.0).unwrap(), 100.0);
        assert_eq!(blend_prices(100.0, 102.0, 0.0).unwrap(), 102.0);
        assert_eq!(blend_prices(100.0, 102.0, 0.5).unwrap(), 101.0);
        assert!(blend_prices(1.0, 2.0, 1.5).is_err());
        assert!(blend_prices(1.0, 2.0, -0.1).is_err());
    }

    #[test]
    fn blend_sizes_hand_values() {
        assert_eq!(blend_sizes(4.0, -2.0, 0.5).unwrap(), 1.0);
        for w in [0.0, 0.3, 1.0] {
            assert_eq!(blend_sizes(7.0, 7.0, w).unwrap(), 7.0);
        }
        assert_eq!(blend_sizes(4.0, -2.0, 1.0).unwrap(), 4.0);
    }

    #[test]
    fn portfolio_value_hand_values() {
        assert_eq!(portfolio_value(0.0, 0.0, 0.0, 100.0, 102.0, 101.0), 0.0);
        // perfect w=0.5 hedge: 10·101 − 5·100 − 5·102 = 0
        assert_eq!(portfolio_value(10.0, -5.0, -5.0, 100.0, 102.0, 101.0), 0.0);
        assert_eq!(portfolio_value(10.0, 0.0, 0.0, 100.0, 102.0, 101.0), 1010.0);
    }

    #[test]
    fn proportional_hedge_zeroes_value_for_any_mids() {
        // h1 = −w·c, h2 = −(1−w)·c zeroes Eq-style value at any mids.
        for (w, m1, m2, c) in [(0.5, 100.0, 102.0, 10.0), (0.3, 95.0, 110.0, -7.0), (0.0, 80.0, 104.0, 3.0)] {
            let bl = blend_prices(m1, m2, w).unwrap();
            let pv = portfolio_value(c, -w * c, -(1.0 - w) * c, m1, m2, bl);
            assert!(pv.abs() < 1e-9, "w={w}: pv={pv}");
        }
    }

    #[test]
    fn identical_mids_let_either_asset_zero_the_value() {
        let pv = portfolio_value(10.0, -10.0, 0.0, 100.0, 100.0, 100.0);
        assert_eq!(pv, 0.0);
        let pv = portfolio_value(10.0, 0.0, -10.0, 100.0, 100.0, 100.0);
        assert_eq!(pv, 0.0);
    }

    #[test]
    fn overhedge_cases() {
        assert_eq!(overhedge(-30.0, 50.0), 0.0); // proper partial hedge
        assert_eq!(overhedge(-60.0, 50.0), 10.0); // overshoot
        assert_eq!(overhedge(20.0, 50.0), 70.0); // same sign = leverage
        assert_eq!(overhedge(0.0, 50.0), 0.0);
        assert_eq!(overhedge(-25.0, 0.0), 25.0); // hedge with nothing to hedge
        // offsetting, within bounds: zero for a grid of magnitudes
        for h in [0.0, 10.0, 49.9, 50.0] {
            assert_eq!(overhedge(-h, 50.0), 0.0);
        }
    }

    #[test]
    fn portfolio_penalty_hand_value_and_degeneracy() {
        let cfg = PortfolioConfig::default();
        assert_eq!(portfolio_penalty(0.0, 0.0, &cfg), 0.0);
        // exponent = 5000/5000 = 1 → 0.1·100·(e−1)·50
        let v = portfolio_penalty(5000.0, 0.0, &cfg);
        assert!((v - 859.140_914_229_522_6).abs() < 1e-9);
        // φ=0 ignores overhedge entirely
        let mut no_phi = cfg.clone();
        no_phi.phi = 0.0;
        assert_eq!(portfolio_penalty(5000.0, 123.0, &no_phi), portfolio_penalty(5000.0, 0.0, &no_phi));
    }

    #[test]
    fn portfolio_penalty_is_increasing() {
        let cfg = PortfolioConfig::default();
        let mut last = -1.0;
        for i in 0..50 {
            let v = portfolio_penalty(i as f64 * 200.0, 0.0, &cfg);
            assert!(v > last);
            last = v;
        }
        let mut last = portfolio_penalty(1000.0, 0.0, &cfg) - 1e-12;
        for i in 0..50 {
            let v = portfolio_penalty(1000.0, i as f64 * 100.0, &cfg);
            assert!(v > last);
            last = v;
        }
    }

    #[test]
    fn convex_map_hand_values() {
        assert_eq!(convex_action_map(1.0, 7.0), (7.0, 0.0));
        assert_eq!(convex_action_map(0.5, 10.0), (5.0, 5.0));
        assert_eq!(convex_action_map(0.3, 0.0), (0.0, 0.0));
    }

    #[test]
    fn reward_portfolio_arithmetic() {
        assert_eq!(reward_portfolio(0.0, 0.0, 0.0, 0.0), 0.0);
        assert_eq!(reward_portfolio(3.0, -1.0, -1.0, 0.5), 0.5);
        assert_eq!(reward_portfolio(0.0, 0.0, 0.0, 2.5), -2.5);
    }

    #[test]
    fn observation_is_three_dimensional_and_zero_at_reset() {
        let mut env = PortfolioEnv::new(&test_cfg()).unwrap();
        let obs = env.reset(1).unwrap();
        assert_eq!(obs, vec![0.0, 0.0, 0.0]);
        assert_eq!(env.obs_dim(), 3);
        assert_eq!(env.act_dim(), 2);
    }

    #[test]
    fn blended_mid_is_convex() {
        let mut env = PortfolioEnv::new(&test_cfg()).unwrap();
        env.reset(2).unwrap();
        let (m1, m2) = env.markets();
        for t in 0..m1.n_steps() {
            let bl = env.blended_mid(t);
            let (lo, hi) = (m1.mid[t].min(m2.mid[t]), m1.mid[t].max(m2.mid[t]));
            assert!(bl >= lo - 1e-12 && bl <= hi + 1e-12);
        }
    }

    #[test]
    fn value_identity_against_independent_valuation() {
        // Recompute positions from recorded flows/actions and value them
        // independently at each step's mids.
        let mut env = PortfolioEnv::new(&test_cfg()).unwrap();
        for seed in 0..10 {
            env.reset(seed).unwrap();
            let mut rng = stream_rng(seed, 991);
            let (mut c, mut h1, mut h2) = (0.0f64, 0.0f64, 0.0f64);
            let mut k = 0usize;
            while !env.state().done {
                let a1: f64 = rng.random_range(-10.0..10.0);
                let a2: f64 = rng.random_range(-10.0..10.0);
                env.step(&[a1, a2]).unwrap();
                let r = &env.records()[k];
                c += r.base.client_bid_size - r.base.client_ask_size;
                h1 += a1;
                h2 += a2;
                let t1 = r.base.step + 1;
                let (m1, m2) = env.markets();
                let bl = env.cfg().w * m1.mid[t1] + (1.0 - env.cfg().w) * m2.mid[t1];
                let pv = portfolio_value(c, h1, h2, m1.mid[t1], m2.mid[t1], bl);
                let scale = pv.abs().max(1.0);
                assert!(
                    (pv - r.portfolio_value).abs() / scale < 1e-9,
                    "seed {seed} step {}: {pv} vs {}",
                    r.base.step,
                    r.portfolio_value
                );
                k += 1;
            }
        }
    }

    #[test]
    fn pnl_blotter_identity_over_random_episodes() {
        let mut env = PortfolioEnv::new(&test_cfg()).unwrap();
        for seed in 20..30 {
            env.reset(seed).unwrap();
            let mut rng = stream_rng(seed, 992);
            let (mut cash, mut c, mut h1, mut h2) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
            while !env.state().done {
                let a1: f64 = rng.random_range(-10.0..10.0);
                let a2: f64 = rng.random_range(-10.0..10.0);
                env.step(&[a1, a2]).unwrap();
                let r = env.records().last().unwrap();
                cash -= r.base.client_bid_size * r.base.client_bid;
                c += r.base.client_bid_size;
                cash += r.base.client_ask_size * r.base.client_ask;
                c -= r.base.client_ask_size;
                let (m1, m2) = env.markets();
                let t = r.base.step;
                let e1 = if a1 > 0.0 { m1.hedge_ask[t] } else { m1.hedge_bid[t] };
                let e2 = if a2 > 0.0 { m2.hedge_ask[t] } else { m2.hedge_bid[t] };
                cash -= a1 * e1 + a2 * e2;
                h1 += a1;
                h2 += a2;
                let bl = env.cfg().w * m1.mid[t + 1] + (1.0 - env.cfg().w) * m2.mid[t + 1];
                let mark = cash + c * bl + h1 * m1.mid[t + 1] + h2 * m2.mid[t + 1];
                let scale = mark.abs().max(1.0);
                assert!(
                    (mark - r.base.net_pnl).abs() / scale < 1e-9,
                    "seed {seed} step {t}: blotter {mark} vs {}",
                    r.base.net_pnl
                );
            }
        }
    }

    #[test]
    fn zero_everything_gives_zero_reward_when_flat() {
        use crate::env::test_support::{synthetic_flow, synthetic_market};
        let n = 6;
        let m = synthetic_market(vec![100.0; n], 0.4, 0.2);
        let f = synthetic_flow(vec![0.0; n], vec![0.0; n]);
        let env_cfg = test_cfg();
        let mut env = PortfolioEnv::with_paths(&env_cfg, m.clone(), m, f.clone(), f).unwrap();
        let out = env.step(&[0.0, 0.0]).unwrap();
        assert_eq!(out.reward, 0.0);
    }

    #[test]
    fn convex_parametrization_maps_actions() {
        let mut cfg = test_cfg();
        cfg.convex_parametrization = true;
        let mut env = PortfolioEnv::new(&cfg).unwrap();
        env.reset(3).unwrap();
        assert_eq!(env.bounds()[0], (0.0, 1.0));
        env.step(&[1.0, 6.0]).unwrap();
        let r = env.records().last().unwrap();
        assert_eq!(r.hedge1_pos, 6.0);
        assert_eq!(r.hedge2_pos, 0.0);
        env.step(&[0.5, 4.0]).unwrap();
        let r = env.records().last().unwrap();
        assert_eq!(r.hedge1_pos, 8.0);
        assert_eq!(r.hedge2_pos, 2.0);
    }

    #[test]
    fn determinism_on_reset() {
        let mut env = PortfolioEnv::new(&test_cfg()).unwrap();
        env.reset(9).unwrap();
        let mids = (env.m1.mid.clone(), env.m2.mid.clone());
        let flows = (env.f1.bid_size.clone(), env.f2.bid_size.clone());
        env.reset(9).unwrap();
        assert_eq!(mids, (env.m1.mid.clone(), env.m2.mid.clone()));
        assert_eq!(flows, (env.f1.bid_size.clone(), env.f2.bid_size.clone()));
    }

    #[test]
    fn rho_one_same_config_duplicates_mid_paths() {
        let mut cfg = test_cfg();
        cfg.rho = 1.0;
        let mut env = PortfolioEnv::new(&cfg).unwrap();
        env.reset(4).unwrap();
        assert_eq!(env.m1.mid, env.m2.mid);
    }
}
