//! Single-asset hedging environment (plain, skew, price-of-risk).
//!
//! Intra-step event order at step t:
//! 1. apply skew to client quotes and flow rates (skew modes),
//! 2. client fills at t's (adjusted) client quotes,
//! 3. hedge executes at t's hedge quotes (buy at ask, sell at bid),
//! 4. market advances to t+1 and revalues the net position,
//! 5. penalty on the new position, mode reward, termination check.
//!
//! A path of n points supports n−1 steps; the final step's `done` is a
//! time-limit, not a terminal state.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::flow::{
    client_trade_rate, generate_flow, skew_adjusted_prices, skew_flow_delta, FlowPath,
};
use crate::market::{generate_market, MarketPath};
use crate::rng::{stream, stream_rng};

use super::{
    heuristic_action, observation, position_penalty, reward_price_of_risk, reward_single,
    AgentAction, EnvConfig, Environment, HedgerState, MakerTakerTracker, Mode, PnlBreakdown,
    StepOutcome, StepRecord,
};

pub struct HedgeEnv {
    cfg: EnvConfig,
    market: MarketPath,
    flow: FlowPath,
    state: HedgerState,
    skew_rng: ChaCha8Rng,
    maker_taker: MakerTakerTracker,
    records: Vec<StepRecord>,
}

impl HedgeEnv {
    /// Build and generate the first episode from `cfg.market.seed`.
    pub fn new(cfg: &EnvConfig) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.normalized();
        let seed = cfg.market.seed;
        let market = generate_market(&cfg.market, 0.0, 1)?.remove(0);
        let flow = generate_flow(&cfg.flow, &market, seed, 0)?;
        let maker_taker = MakerTakerTracker::new(cfg.maker_taker_window);
        Ok(HedgeEnv {
            skew_rng: stream_rng(seed, stream::SKEW_FLOW),
            market,
            flow,
            state: HedgerState::default(),
            maker_taker,
            records: Vec::new(),
            cfg,
        })
    }

    /// Replay injected market/flow data instead of generating it.
    pub fn with_market_flow(cfg: &EnvConfig, market: MarketPath, flow: FlowPath) -> Result<Self> {
        cfg.validate()?;
        let cfg = cfg.normalized();
        if flow.bid_size.len() != market.n_steps() {
            return Err(Error::Param("market and flow lengths must align".into()));
        }
        let maker_taker = MakerTakerTracker::new(cfg.maker_taker_window);
        Ok(HedgeEnv {
            skew_rng: stream_rng(cfg.market.seed, stream::SKEW_FLOW),
            market,
            flow,
            state: HedgerState::default(),
            maker_taker,
            records: Vec::new(),
            cfg,
        })
    }

    pub fn cfg(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn market(&self) -> &MarketPath {
        &self.market
    }

    pub fn flow(&self) -> &FlowPath {
        &self.flow
    }

    pub fn state(&self) -> &HedgerState {
        &self.state
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// Rolling (maker, taker) per-unit spreads; `None` sides had no trades
    /// inside the window.
    pub fn maker_taker(&self) -> (Option<f64>, Option<f64>) {
        (self.maker_taker.maker(), self.maker_taker.taker())
    }

    /// Heuristic action for the current state.
    pub fn heuristic(&self) -> AgentAction {
        heuristic_action(&self.state, &self.cfg)
    }

    pub fn observation_vec(&self) -> Vec<f64> {
        vec![observation(&self.state, &self.cfg)]
    }

    /// Step with a typed action. Clips to bounds; the clip flag is returned
    /// in the record's action columns (post-clip values).
    pub fn step_action(&mut self, action: AgentAction) -> Result<StepOutcome> {
        if self.state.done {
            return Err(Error::State("step called on a finished episode".into()));
        }
        let t = self.state.t;
        debug_assert!(t + 1 < self.market.n_steps());
        let (action, _clipped) =
            AgentAction::clipped(action.hedge_size, action.skew, self.cfg.max_hedge_size);
        let skew = if self.cfg.mode.has_skew() { action.skew } else { 0.0 };
        let mid = self.market.mid[t];

        // 1. Skew: move the attracting quote toward mid; elastic flow draws
        // extra arrivals on that side from the dedicated stream.
        let (bid, ask) = if self.cfg.mode.has_skew() {
            skew_adjusted_prices(self.market.client_bid[t], self.market.client_ask[t], mid, skew)
        } else {
            (self.market.client_bid[t], self.market.client_ask[t])
        };
        let (mut bid_size, mut ask_size) = (self.flow.bid_size[t], self.flow.ask_size[t]);
        if self.cfg.mode == Mode::Skew && self.cfg.flow.beta_skew > 0.0 && skew != 0.0 {
            let rate = client_trade_rate(&self.cfg.flow, self.market.rolling_vol[t], self.market.mean_vol)?;
            let delta = skew_flow_delta(skew, &self.cfg.flow, rate)?;
            let extra = crate::flow::draw_poisson(delta.abs(), &mut self.skew_rng)?;
            if delta > 0.0 {
                bid_size += extra;
            } else {
                ask_size += extra;
            }
        }

        // 2. Client fills: bid side buys from clients, ask side sells.
        self.state.client_position += bid_size - ask_size;
        let client_spread = bid_size * (mid - bid) + ask_size * (ask - mid);
        self.state.client_pnl += client_spread;

        // 3. Hedge at this step's hedge quotes.
        let h = action.hedge_size;
        let hedge_spread = if h > 0.0 {
            h * (mid - self.market.hedge_ask[t])
        } else if h < 0.0 {
            h * (mid - self.market.hedge_bid[t])
        } else {
            0.0
        };
        self.state.hedge_position += h;
        self.state.hedge_pnl += hedge_spread;

        // 4. Market revaluation of the post-trade position.
        let net_pos = self.state.net_position();
        let reval = net_pos * (self.market.mid[t + 1] - mid);
        self.state.market_pnl += reval;

        // 5. Penalty, reward, termination.
        let pnl = PnlBreakdown {
            client_spread_pnl: client_spread,
            hedge_spread_pnl: hedge_spread,
            market_reval_pnl: reval,
        };
        let penalty = position_penalty(net_pos, &self.cfg);
        let mut reward = match self.cfg.mode {
            Mode::Single | Mode::Skew => reward_single(&pnl, penalty),
            Mode::PriceOfRisk => reward_price_of_risk(&pnl, penalty, self.cfg.literal_price_of_risk),
        };
        let breached = net_pos.abs() > self.cfg.termination_multiple * self.cfg.max_pos_limit;
        if breached {
            reward -= self.cfg.terminal_extra_penalty;
        }

        self.state.t = t + 1;
        let timeout = !breached && self.state.t + 1 == self.market.n_steps();
        self.state.done = breached || timeout;
        self.state.history.push(pnl);

        self.maker_taker.push_step(
            bid_size + ask_size,
            client_spread,
            h.abs(),
            -hedge_spread,
        );
        let (maker, taker) = if self.cfg.mode == Mode::PriceOfRisk {
            self.maker_taker()
        } else {
            (None, None)
        };
        self.records.push(StepRecord {
            step: t,
            mid,
            client_bid: bid,
            client_ask: ask,
            hedge_bid: self.market.hedge_bid[t],
            hedge_ask: self.market.hedge_ask[t],
            client_bid_size: bid_size,
            client_ask_size: ask_size,
            action_hedge: h,
            action_skew: skew,
            client_pos: self.state.client_position,
            hedge_pos: self.state.hedge_position,
            net_pos,
            client_pnl: self.state.client_pnl,
            hedge_pnl: self.state.hedge_pnl,
            market_pnl: self.state.market_pnl,
            net_pnl: self.state.net_pnl(),
            penalty,
            reward,
            done: self.state.done,
            maker_spread: maker,
            taker_spread: taker,
        });

        Ok(StepOutcome {
            obs: self.observation_vec(),
            reward,
            done: self.state.done,
            timeout,
            abs_position: net_pos.abs(),
        })
    }
}

impl Environment for HedgeEnv {
    fn obs_dim(&self) -> usize {
        1
    }

    fn act_dim(&self) -> usize {
        self.cfg.mode.action_dim()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b = vec![(-self.cfg.max_hedge_size, self.cfg.max_hedge_size)];
        if self.cfg.mode.has_skew() {
            b.push((-1.0, 1.0));
        }
        b
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        self.cfg.market.seed = seed;
        self.market = generate_market(&self.cfg.market, 0.0, 1)?.remove(0);
        self.flow = generate_flow(&self.cfg.flow, &self.market, seed, 0)?;
        self.skew_rng = stream_rng(seed, stream::SKEW_FLOW);
        self.state = HedgerState::default();
        self.maker_taker.clear();
        self.records.clear();
        Ok(self.observation_vec())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepOutcome> {
        if action.len() != self.act_dim() {
            return Err(Error::Param(format!(
                "action has {} dims, environment expects {}",
                action.len(),
                self.act_dim()
            )));
        }
        let skew = if self.cfg.mode.has_skew() { action[1] } else { 0.0 };
        self.step_action(AgentAction { hedge_size: action[0], skew })
    }

    fn horizon(&self) -> usize {
        self.market.n_steps() - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::FlowConfig;
    use rand::Rng;

    use crate::env::test_support::{synthetic_flow, synthetic_market};

    fn test_cfg() -> EnvConfig {
        EnvConfig {
            flow: FlowConfig { c_scale: 10.0, beta_flow: 0.15, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn reset_gives_zero_observation_and_reproducible_data() {
        let mut env = HedgeEnv::new(&test_cfg()).unwrap();
        let obs = env.reset(42).unwrap();
        assert_eq!(obs, vec![0.0]);
        let mid_a = env.market().mid.clone();
        env.reset(42).unwrap();
        assert_eq!(env.market().mid, mid_a);
        env.reset(43).unwrap();
        assert!(env.market().mid[..8] != mid_a[..8]);
    }

    #[test]
    fn null_step_on_flat_market_is_zero() {
        let market = synthetic_market(vec![100.0; 4], 0.4, 0.2);
        let flow = synthetic_flow(vec![0.0; 4], vec![0.0; 4]);
        let mut env = HedgeEnv::with_market_flow(&test_cfg(), market, flow).unwrap();
        let out = env.step(&[0.0]).unwrap();
        assert_eq!(out.reward, 0.0);
        assert_eq!(env.state().net_position(), 0.0);
        assert_eq!(env.state().net_pnl(), 0.0);
    }

    #[test]
    fn hand_computed_two_step_episode() {
        // Step 0: buy 10 from client at bid 99.6 (mid 100) → client +4.0;
        // mid moves to 99.8 → market −2.0. Step 1: sell 10 at hedge bid
        // 99.7 (mid 99.8) → hedge −1.0. Net +1.0.
        let mut market = synthetic_market(vec![100.0, 99.8, 99.8], 0.4, 0.1);
        market.hedge_bid[1] = 99.7; // hedge half-spread 0.1 at mid 99.8
        let flow = synthetic_flow(vec![10.0, 0.0, 0.0], vec![0.0; 3]);
        let mut env = HedgeEnv::with_market_flow(&test_cfg(), market, flow).unwrap();

        env.step(&[0.0]).unwrap();
        let s = env.state();
        assert!((s.client_pnl - 4.0).abs() < 1e-12);
        assert!((s.market_pnl + 2.0).abs() < 1e-12);
        assert_eq!(s.net_position(), 10.0);

        env.step(&[-10.0]).unwrap();
        let s = env.state();
        assert!((s.hedge_pnl + 1.0).abs() < 1e-12);
        assert!((s.net_pnl() - 1.0).abs() < 1e-12);
        assert_eq!(s.net_position(), 0.0);
        assert!(s.done);
    }

    #[test]
    fn reward_decomposition_identity() {
        let mut env = HedgeEnv::new(&test_cfg()).unwrap();
        env.reset(3).unwrap();
        let mut rng = stream_rng(3, 77);
        while !env.state().done {
            let h: f64 = rng.random_range(-10.0..10.0);
            let out = env.step(&[h]).unwrap();
            let pnl = env.state().history.last().unwrap();
            let rec = env.records().last().unwrap();
            // reward + penalty = step PNL sum, exactly (no breach here)
            if !out.done || out.timeout {
                assert!((out.reward + rec.penalty - pnl.total()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blotter_identity_over_random_episodes() {
        // Independent blotter: replay every trade at its price; at each step
        // cash + position·mid must equal the decomposed net PNL to 1e−9.
        let cfg = test_cfg();
        let mut env = HedgeEnv::new(&cfg).unwrap();
        for seed in 0..20 {
            env.reset(seed).unwrap();
            let mut rng = stream_rng(seed, 1234);
            let (mut cash, mut pos) = (0.0f64, 0.0f64);
            while !env.state().done {
                let h: f64 = rng.random_range(-10.0..10.0);
                env.step(&[h]).unwrap();
                let r = env.records().last().unwrap();
                cash -= r.client_bid_size * r.client_bid;
                pos += r.client_bid_size;
                cash += r.client_ask_size * r.client_ask;
                pos -= r.client_ask_size;
                let exec = if r.action_hedge > 0.0 { r.hedge_ask } else { r.hedge_bid };
                cash -= r.action_hedge * exec;
                pos += r.action_hedge;
                let mark = cash + pos * env.market().mid[r.step + 1];
                let scale = mark.abs().max(1.0);
                assert!(
                    (mark - r.net_pnl).abs() / scale < 1e-9,
                    "seed {seed} step {}: blotter {mark} vs decomposition {}",
                    r.step,
                    r.net_pnl
                );
            }
        }
    }

    #[test]
    fn zero_flow_zero_action_pnl_is_identically_zero() {
        let cfg = test_cfg();
        let market = generate_market(&cfg.market, 0.0, 1).unwrap().remove(0);
        let n = market.n_steps();
        let flow = synthetic_flow(vec![0.0; n], vec![0.0; n]);
        let mut env = HedgeEnv::with_market_flow(&cfg, market, flow).unwrap();
        while !env.state().done {
            env.step(&[0.0]).unwrap();
        }
        assert_eq!(env.state().net_pnl(), 0.0);
    }

    #[test]
    fn termination_at_first_breach_only() {
        let cfg = test_cfg(); // breach beyond 2·50 = 100
        let n = 64;
        let market = synthetic_market(vec![100.0; n], 0.4, 0.2);
        // 9 units of one-sided flow per step: position hits 99 at step 10,
        // 108 at step 11.
        let flow = synthetic_flow(vec![9.0; n], vec![0.0; n]);
        let mut env = HedgeEnv::with_market_flow(&cfg, market, flow).unwrap();
        let mut steps = 0;
        let mut last = None;
        while !env.state().done {
            last = Some(env.step(&[0.0]).unwrap());
            steps += 1;
            let pos = env.state().net_position();
            if !env.state().done {
                assert!(pos.abs() <= 2.0 * cfg.max_pos_limit, "no early termination");
            }
        }
        assert_eq!(steps, 12);
        assert_eq!(env.state().net_position(), 108.0);
        let out = last.unwrap();
        assert!(!out.timeout);
        // Terminal extra penalty present in the final reward.
        let rec = env.records().last().unwrap();
        assert!((out.reward - (rec.net_pnl - env.records()[steps - 2].net_pnl - rec.penalty - cfg.terminal_extra_penalty)).abs() < 1e-9);
        // Stepping after done is a state error.
        assert!(matches!(env.step(&[0.0]), Err(Error::State(_))));
    }

    #[test]
    fn timeout_flag_on_horizon_end() {
        let cfg = test_cfg();
        let mut env = HedgeEnv::new(&cfg).unwrap();
        env.reset(5).unwrap();
        let mut out = None;
        for _ in 0..env.horizon() {
            out = Some(env.step_action(env.heuristic()).unwrap());
        }
        let out = out.unwrap();
        assert!(out.done && out.timeout);
        assert_eq!(env.records().len(), env.horizon());
    }

    #[test]
    fn action_clipping_is_effective() {
        let cfg = test_cfg();
        let mut env = HedgeEnv::new(&cfg).unwrap();
        env.reset(8).unwrap();
        env.step(&[1e9]).unwrap();
        assert_eq!(env.records()[0].action_hedge, cfg.max_hedge_size);
        env.step(&[f64::NEG_INFINITY]).unwrap();
        assert_eq!(env.records()[1].action_hedge, -cfg.max_hedge_size);
    }

    #[test]
    fn dummy_hedger_cuts_pnl_variance_vs_never_hedge() {
        let cfg = test_cfg();
        let mut diffs_dummy = Vec::new();
        let mut diffs_never = Vec::new();
        for seed in 0..25 {
            for hedged in [true, false] {
                let mut env = HedgeEnv::new(&cfg).unwrap();
                env.reset(seed).unwrap();
                let mut last = 0.0;
                while !env.state().done {
                    let a = if hedged { env.heuristic() } else { AgentAction { hedge_size: 0.0, skew: 0.0 } };
                    env.step_action(a).unwrap();
                    let pnl = env.state().net_pnl();
                    if hedged { &mut diffs_dummy } else { &mut diffs_never }.push(pnl - last);
                    last = pnl;
                }
            }
        }
        let sd_dummy = crate::metrics::sample_std(&diffs_dummy);
        let sd_never = crate::metrics::sample_std(&diffs_never);
        assert!(
            sd_dummy < sd_never,
            "dummy stdev {sd_dummy} not below never-hedge {sd_never}"
        );
    }

    #[test]
    fn skew_mode_books_adjusted_prices() {
        let n = 8;
        let market = synthetic_market(vec![100.0; n], 0.4, 0.2);
        let flow = synthetic_flow(vec![5.0; n], vec![5.0; n]);
        let cfg = EnvConfig { mode: Mode::Skew, ..test_cfg() };
        let mut env = HedgeEnv::with_market_flow(&cfg, market, flow).unwrap();
        // skew −1 lifts the bid to mid: bid-side spread income vanishes.
        env.step(&[0.0, -1.0]).unwrap();
        let r = env.records().last().unwrap();
        assert_eq!(r.client_bid, 100.0);
        assert_eq!(r.client_ask, 100.4);
        // income only from the ask side (5 × 0.4), plus any attracted flow
        // at the adjusted bid (which is mid, so zero spread income).
        assert!((r.client_pnl - 2.0).abs() < 1e-12);
    }

    #[test]
    fn non_elastic_skew_flow_is_bitwise_identical() {
        // β_skew = 0: flow consumed with skew actions matches the base flow.
        let mut cfg = EnvConfig { mode: Mode::Skew, ..test_cfg() };
        cfg.flow.beta_skew = 0.0;
        let mut env = HedgeEnv::new(&cfg).unwrap();
        env.reset(7).unwrap();
        let base_bid = env.flow().bid_size.clone();
        let base_ask = env.flow().ask_size.clone();
        let mut rng = stream_rng(7, 55);
        while !env.state().done {
            let s: f64 = rng.random_range(-1.0..1.0);
            env.step(&[0.0, s]).unwrap();
        }
        for (i, r) in env.records().iter().enumerate() {
            assert_eq!(r.client_bid_size, base_bid[i]);
            assert_eq!(r.client_ask_size, base_ask[i]);
        }
    }

    #[test]
    fn skew_attracts_offsetting_flow_on_average() {
        // Expected net flow is nonincreasing in skew for elastic clients.
        let cfg = EnvConfig { mode: Mode::Skew, ..test_cfg() };
        let mut means = Vec::new();
        for skew in [-1.0, 0.0, 1.0] {
            let mut total = 0.0;
            let mut steps = 0usize;
            for seed in 0..40 {
                let mut env = HedgeEnv::new(&cfg).unwrap();
                env.reset(seed).unwrap();
                while !env.state().done {
                    let pos = env.state().net_position();
                    // keep position in check so episodes run full length
                    let h = (-pos).clamp(-10.0, 10.0);
                    env.step(&[h, skew]).unwrap();
                    let r = env.records().last().unwrap();
                    total += r.client_bid_size - r.client_ask_size;
                    steps += 1;
                }
            }
            means.push(total / steps as f64);
        }
        assert!(means[0] > means[1] && means[1] > means[2], "net flow means {means:?}");
    }

    #[test]
    fn price_of_risk_mode_skew_moves_prices_not_flow() {
        let cfg = EnvConfig { mode: Mode::PriceOfRisk, ..test_cfg() };
        let mut env = HedgeEnv::new(&cfg).unwrap();
        env.reset(11).unwrap();
        let base_bid = env.flow().bid_size.clone();
        while !env.state().done {
            env.step(&[0.0, -0.8]).unwrap();
        }
        for (i, r) in env.records().iter().enumerate() {
            assert_eq!(r.client_bid_size, base_bid[i], "flow must be non-elastic");
            assert!(r.client_bid > env.market().client_bid[i], "bid must be lifted");
        }
    }

    #[test]
    fn maker_taker_ratio_tracks_nu_without_skew() {
        // With no skew and the default railed spreads, maker/taker ≈
        // nu_client/nu_hedge.
        let cfg = test_cfg();
        let mut env = HedgeEnv::new(&cfg).unwrap();
        env.reset(13).unwrap();
        while !env.state().done {
            let a = env.heuristic();
            env.step_action(a).unwrap();
        }
        let (maker, taker) = env.maker_taker();
        let ratio = maker.unwrap() / taker.unwrap();
        assert!(
            (ratio - cfg.market.nu_client / cfg.market.nu_hedge).abs() < 0.15,
            "maker/taker ratio {ratio}"
        );
    }
}
