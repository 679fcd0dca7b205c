//! Client trade flow: volatility-modulated Poisson bid/ask arrivals with a
//! price-correlated imbalance, plus the skew elasticity model.
//!
//! ```text
//! rate_t   = C·(α + σ_roll[t]/σ_mean)
//! λ_t      = β·(ρ·z_t + √(1−ρ²)·ε_t)          z = standardized log-price signal
//! bid_t    ~ Poisson(rate_t·max(1−λ_t, 0))     clients selling to the agent
//! ask_t    ~ Poisson(rate_t·max(1+λ_t, 0))     clients buying from the agent
//! ```
//!
//! Sign convention: bid-side trades increase the agent's (long) position, so
//! `net = bid − ask` is the per-step client-driven position change. Skew adds
//! `|skew|·β_skew·MaxHedgeSize/rate` to the attracted side's Poisson rate;
//! the extra arrivals are drawn from a separate stream so the base flow is
//! bit-identical with and without skew.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{correlate, MarketPath, NoiseDraws};
use crate::metrics::{mean, sample_std};
use crate::rng::{stream, stream_rng};

/// Parameters of the client-flow model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Flow scaling factor C.
    pub c_scale: f64,
    /// Vol-independent mean-flow constant α.
    pub alpha_flow: f64,
    /// Sensitivity β of the net intensity to the log-price signal.
    pub beta_flow: f64,
    /// Correlation ρ between net intensity and the log-price signal.
    pub rho_flow: f64,
    /// Skew elasticity constant β; 0 makes client flow non-elastic.
    pub beta_skew: f64,
    /// Size bound shared with the action space.
    pub max_hedge_size: f64,
    /// Rolling window (steps) for smoothing/standardizing the log-price signal.
    pub intensity_smoothing_window: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            c_scale: 100.0,
            alpha_flow: 1.0,
            beta_flow: 0.8,
            rho_flow: 0.7,
            beta_skew: 4.0,
            max_hedge_size: 10.0,
            intensity_smoothing_window: 10,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_scale > 0.0) {
            return Err(Error::Config(format!("flow.c_scale must be > 0, got {}", self.c_scale)));
        }
        if !(self.alpha_flow >= 0.0) {
            return Err(Error::Config(format!(
                "flow.alpha_flow must be >= 0, got {}",
                self.alpha_flow
            )));
        }
        if !(self.rho_flow.abs() <= 1.0) {
            return Err(Error::Config(format!(
                "flow.rho_flow must satisfy |rho| <= 1, got {}",
                self.rho_flow
            )));
        }
        if !(self.beta_skew >= 0.0) {
            return Err(Error::Config(format!(
                "flow.beta_skew must be >= 0, got {}",
                self.beta_skew
            )));
        }
        if !(self.max_hedge_size > 0.0) {
            return Err(Error::Config(format!(
                "flow.max_hedge_size must be > 0, got {}",
                self.max_hedge_size
            )));
        }
        if self.intensity_smoothing_window < 1 {
            return Err(Error::Config("flow.intensity_smoothing_window must be >= 1".into()));
        }
        Ok(())
    }
}

/// One episode of client flow. Sizes are integer-valued Poisson draws stored
/// as `f64` (portfolio blending produces fractional sizes downstream).
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub bid_size: Vec<f64>,
    pub ask_size: Vec<f64>,
    pub net_size: Vec<f64>,
    pub net_intensity: Vec<f64>,
}

/// `C·(α + σ_roll/σ_mean)` — client arrival rate per side before imbalance.
pub fn client_trade_rate(cfg: &FlowConfig, rolling_vol: f64, mean_vol: f64) -> Result<f64> {
    if !(mean_vol > 0.0) {
        return Err(Error::Data(format!(
            "degenerate market: mean volatility must be > 0, got {mean_vol}"
        )));
    }
    Ok(cfg.c_scale * (cfg.alpha_flow + rolling_vol / mean_vol))
}

/// `(max(1−λ, 0), max(1+λ, 0))` — bid/ask intensity multipliers.
pub fn intensity_multipliers(lambda_net: f64) -> (f64, f64) {
    ((1.0 - lambda_net).max(0.0), (1.0 + lambda_net).max(0.0))
}

/// Standardized log-price signal: z-score of the current log price against
/// its trailing `min(t+1, window)` points. Degenerate windows give 0.
pub(crate) fn standardized_signal(log_mid: &[f64], window: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    (0..log_mid.len())
        .map(|t| {
            let k = window.min(t + 1);
            let w = &log_mid[t + 1 - k..=t];
            let sd = sample_std(w);
            if sd == 0.0 {
                0.0
            } else {
                (log_mid[t] - mean(w)) / sd
            }
        })
        .collect()
}

/// `λ_t = β·(ρ·z_t + √(1−ρ²)·ε_t)` with `z` the standardized log-price
/// signal; one independent draw per step.
pub fn net_intensity(log_mid: &[f64], cfg: &FlowConfig, indep_draws: &[f64]) -> Result<Vec<f64>> {
    if log_mid.len() != indep_draws.len() {
        return Err(Error::Param("net intensity inputs must align".into()));
    }
    let z = standardized_signal(log_mid, cfg.intensity_smoothing_window);
    z.iter()
        .zip(indep_draws)
        .map(|(&zt, &et)| Ok(cfg.beta_flow * correlate(zt, et, cfg.rho_flow)?))
        .collect()
}

/// Poisson draw at `lambda`; exactly zero when the rate is zero.
pub fn draw_poisson(lambda: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Param(format!("Poisson rate must be finite and >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let dist = Poisson::new(lambda)
        .map_err(|e| Error::Param(format!("Poisson rate {lambda} rejected: {e}")))?;
    Ok(dist.sample(rng))
}

/// Draw one step of client sizes: `bid ~ Poisson(rate·m_bid)`,
/// `ask ~ Poisson(rate·m_ask)`, `net = bid − ask`.
pub fn draw_client_sizes(
    rate: f64,
    multipliers: (f64, f64),
    rng_bid: &mut ChaCha8Rng,
    rng_ask: &mut ChaCha8Rng,
) -> Result<(f64, f64, f64)> {
    if rate < 0.0 {
        return Err(Error::Param(format!("client trade rate must be >= 0, got {rate}")));
    }
    let bid = draw_poisson(rate * multipliers.0, rng_bid)?;
    let ask = draw_poisson(rate * multipliers.1, rng_ask)?;
    Ok((bid, ask, bid - ask))
}

/// Pre-generate an episode of client flow for a market path. The skew
/// channel is *not* applied here — skew-attracted extra arrivals are drawn
/// by the environment from their own stream at action time.
pub fn generate_flow(cfg: &FlowConfig, market: &MarketPath, seed: u64, asset: u64) -> Result<FlowPath> {
    cfg.validate()?;
    let n = market.n_steps();
    let offset = asset * stream::ASSET_STRIDE;
    let log_mid: Vec<f64> = market.mid.iter().map(|m| m.ln()).collect();
    let indep = NoiseDraws::generate(seed, stream::INTENSITY + offset, 1, n).eps.remove(0);
    let lambda = net_intensity(&log_mid, cfg, &indep)?;

    let mut rng_bid = stream_rng(seed, stream::FLOW_BID + offset);
    let mut rng_ask = stream_rng(seed, stream::FLOW_ASK + offset);
    let mut bid_size = Vec::with_capacity(n);
    let mut ask_size = Vec::with_capacity(n);
    let mut net_size = Vec::with_capacity(n);
    for t in 0..n {
        let rate = client_trade_rate(cfg, market.rolling_vol[t], market.mean_vol)?;
        let mult = intensity_multipliers(lambda[t]);
        let (b, a, net) = draw_client_sizes(rate, mult, &mut rng_bid, &mut rng_ask)?;
        bid_size.push(b);
        ask_size.push(a);
        net_size.push(net);
    }
    Ok(FlowPath { bid_size, ask_size, net_size, net_intensity: lambda })
}

/// Net-flow adjustment for a skew action: magnitude
/// `|skew|·β_skew·MaxHedgeSize/rate`, signed positive for the bid side.
/// Negative skew attracts position-increasing (bid) flow, positive skew
/// attracts position-decreasing (ask) flow.
pub fn skew_flow_delta(skew: f64, cfg: &FlowConfig, client_rate: f64) -> Result<f64> {
    if !(skew.abs() <= 1.0) {
        return Err(Error::Param(format!("skew must satisfy |skew| <= 1, got {skew}")));
    }
    if !(client_rate > 0.0) {
        return Err(Error::Param(format!("client trade rate must be > 0, got {client_rate}")));
    }
    Ok(-skew * cfg.beta_skew * cfg.max_hedge_size / client_rate)
}

/// Move the attracting quote toward mid:
/// `skew ≤ 0`: `bid′ = bid − skew·(mid − bid)`; `skew > 0`:
/// `ask′ = ask − skew·(ask − mid)`. The other side is untouched.
pub fn skew_adjusted_prices(bid: f64, ask: f64, mid: f64, skew: f64) -> (f64, f64) {
    debug_assert!(bid <= mid && mid <= ask, "quotes must straddle mid");
    debug_assert!(skew.abs() <= 1.0, "skew must be in [-1, 1]");
    if skew <= 0.0 {
        (bid - skew * (mid - bid), ask)
    } else {
        (bid, ask - skew * (ask - mid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{generate_market, MarketConfig};
    use crate::metrics::sample_corr;

    #[test]
    fn rate_trivial_and_hand_values() {
        let cfg = FlowConfig { c_scale: 100.0, alpha_flow: 0.0, ..Default::default() };
        assert_eq!(client_trade_rate(&cfg, 0.5, 0.5).unwrap(), 100.0);
        let cfg = FlowConfig { c_scale: 100.0, alpha_flow: 1.0, ..Default::default() };
        assert_eq!(client_trade_rate(&cfg, 1.0, 0.5).unwrap(), 300.0);
        assert!(matches!(client_trade_rate(&cfg, 1.0, 0.0), Err(Error::Data(_))));
    }

    #[test]
    fn rate_is_nondecreasing_in_vol() {
        let cfg = FlowConfig::default();
        let mut last = f64::NEG_INFINITY;
        for i in 0..50 {
            let r = client_trade_rate(&cfg, i as f64 * 0.01, 0.2).unwrap();
            assert!(r >= last);
            last = r;
        }
    }

    #[test]
    fn multipliers_hand_values() {
        assert_eq!(intensity_multipliers(0.0), (1.0, 1.0));
        assert_eq!(intensity_multipliers(1.5), (0.0, 2.5));
        let (b, a) = intensity_multipliers(-0.4);
        assert!((b - 1.4).abs() < 1e-12 && (a - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_kills_intensity() {
        let cfg = FlowConfig { beta_flow: 0.0, ..Default::default() };
        let lam = net_intensity(&[4.6, 4.7, 4.8], &cfg, &[1.0, -1.0, 0.5]).unwrap();
        assert!(lam.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn perfect_rho_returns_signal() {
        let cfg = FlowConfig { beta_flow: 1.0, rho_flow: 1.0, ..Default::default() };
        let log_mid = [4.6, 4.62, 4.61, 4.65, 4.60];
        let lam = net_intensity(&log_mid, &cfg, &[9.0; 5]).unwrap();
        let z = standardized_signal(&log_mid, cfg.intensity_smoothing_window);
        assert_eq!(lam, z);
    }

    #[test]
    fn intensity_correlates_with_signal() {
        // Sample corr(λ, z) ≈ ρ over 10⁴ steps.
        let mcfg = MarketConfig { n_steps: 10_000, dt: 1e-4, seed: 31, ..Default::default() };
        let market = generate_market(&mcfg, 0.0, 1).unwrap().remove(0);
        let cfg = FlowConfig { rho_flow: 0.7, ..Default::default() };
        let log_mid: Vec<f64> = market.mid.iter().map(|m| m.ln()).collect();
        let indep = NoiseDraws::generate(77, stream::INTENSITY, 1, 10_000).eps.remove(0);
        let lam = net_intensity(&log_mid, &cfg, &indep).unwrap();
        let z = standardized_signal(&log_mid, cfg.intensity_smoothing_window);
        let c = sample_corr(&lam, &z).unwrap();
        assert!((c - 0.7).abs() < 0.07, "sample correlation {c}");
    }

    #[test]
    fn zero_rate_draws_nothing() {
        let mut b = stream_rng(1, stream::FLOW_BID);
        let mut a = stream_rng(1, stream::FLOW_ASK);
        assert_eq!(draw_client_sizes(0.0, (1.0, 1.0), &mut b, &mut a).unwrap(), (0.0, 0.0, 0.0));
        assert!(draw_client_sizes(-1.0, (1.0, 1.0), &mut b, &mut a).is_err());
    }

    #[test]
    fn poisson_means_match_rates() {
        let n = 100_000usize;
        let mut rng_b = stream_rng(5, stream::FLOW_BID);
        let mut rng_a = stream_rng(5, stream::FLOW_ASK);
        let mut bids = Vec::with_capacity(n);
        let mut nets = Vec::with_capacity(n);
        for _ in 0..n {
            let (b, _a, net) =
                draw_client_sizes(50.0, (0.5, 1.0), &mut rng_b, &mut rng_a).unwrap();
            bids.push(b);
            nets.push(net);
        }
        // bid ~ Poisson(25): mean within 3·SE, SE = √(25/n)
        let se_bid = (25.0f64 / n as f64).sqrt();
        assert!((mean(&bids) - 25.0).abs() <= 3.0 * se_bid, "bid mean {}", mean(&bids));
        // net = Poisson(25) − Poisson(50): mean −25 within 3·SE, SE = √(75/n)
        let se_net = (75.0f64 / n as f64).sqrt();
        assert!((mean(&nets) + 25.0).abs() <= 3.0 * se_net, "net mean {}", mean(&nets));
    }

    #[test]
    fn symmetric_flow_at_zero_lambda() {
        let n = 100_000usize;
        let mut rng_b = stream_rng(6, stream::FLOW_BID);
        let mut rng_a = stream_rng(6, stream::FLOW_ASK);
        let nets: Vec<f64> = (0..n)
            .map(|_| draw_client_sizes(50.0, intensity_multipliers(0.0), &mut rng_b, &mut rng_a).unwrap().2)
            .collect();
        let se = (100.0f64 / n as f64).sqrt();
        assert!(mean(&nets).abs() <= 3.0 * se, "net mean {}", mean(&nets));
    }

    #[test]
    fn generated_flow_is_integer_valued_and_consistent() {
        let mcfg = MarketConfig { seed: 9, ..Default::default() };
        let market = generate_market(&mcfg, 0.0, 1).unwrap().remove(0);
        let cfg = FlowConfig { c_scale: 10.0, ..Default::default() };
        let flow = generate_flow(&cfg, &market, mcfg.seed, 0).unwrap();
        for t in 0..market.n_steps() {
            assert!(flow.bid_size[t] >= 0.0 && flow.bid_size[t].fract() == 0.0);
            assert!(flow.ask_size[t] >= 0.0 && flow.ask_size[t].fract() == 0.0);
            assert_eq!(flow.net_size[t], flow.bid_size[t] - flow.ask_size[t]);
        }
        let again = generate_flow(&cfg, &market, mcfg.seed, 0).unwrap();
        assert_eq!(flow, again);
    }

    #[test]
    fn skew_delta_hand_values() {
        let cfg = FlowConfig { beta_skew: 4.0, max_hedge_size: 10.0, ..Default::default() };
        assert_eq!(skew_flow_delta(0.0, &cfg, 20.0).unwrap(), 0.0);
        let non_elastic = FlowConfig { beta_skew: 0.0, ..cfg.clone() };
        assert_eq!(skew_flow_delta(0.7, &non_elastic, 20.0).unwrap(), 0.0);
        // skew −1: bid-rate boost of 4·10/20 = 2
        assert_eq!(skew_flow_delta(-1.0, &cfg, 20.0).unwrap(), 2.0);
        // positive skew boosts the ask side (negative sign)
        assert_eq!(skew_flow_delta(0.5, &cfg, 20.0).unwrap(), -1.0);
        assert!(skew_flow_delta(1.5, &cfg, 20.0).is_err());
    }

    #[test]
    fn skew_delta_is_nonincreasing_in_skew() {
        let cfg = FlowConfig::default();
        let mut last = f64::INFINITY;
        for i in 0..=20 {
            let s = -1.0 + i as f64 * 0.1;
            let d = skew_flow_delta(s, &cfg, 20.0).unwrap();
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn skew_price_adjustment() {
        let (b, a) = skew_adjusted_prices(99.0, 101.5, 100.0, 0.0);
        assert_eq!((b, a), (99.0, 101.5));
        let (b, a) = skew_adjusted_prices(99.0, 101.5, 100.0, -1.0);
        assert_eq!(b, 100.0);
        assert_eq!(a, 101.5);
        // ask′ = 101.5 − 0.5·1.5 = 100.75
        let (b, a) = skew_adjusted_prices(99.0, 101.5, 100.0, 0.5);
        assert_eq!(b, 99.0);
        assert!((a - 100.75).abs() < 1e-12);
    }

    #[test]
    fn adjusted_quotes_stay_inside_band() {
        for i in 0..=40 {
            let skew = -1.0 + i as f64 * 0.05;
            let (b, a) = skew_adjusted_prices(99.0, 101.5, 100.0, skew);
            assert!((99.0..=100.0).contains(&b));
            assert!((100.0..=101.5).contains(&a));
            assert!(a >= b);
        }
    }
}
