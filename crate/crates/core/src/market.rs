//! Seeded market-data generation: log-Euler mid-price paths, rolling price
//! volatility, and stochastic two-venue bid/ask spreads.
//!
//! ```text
//! Δlog S_t = μΔt − ½σ²Δt + σ·ε_t·√Δt
//! δ_t      = σ_roll[t] + exp(N(0, γ·S0·σ/√n))   clamped to [lo, hi]·σ_mean
//! bid_t    = mid_t − ν·δ_t,   ask_t = mid_t + ν·δ_t
//! ```
//!
//! An episode's market data is generated up front for the full horizon; the
//! environments then replay it step by step. Client spreads are wider than
//! hedge spreads (`nu_client > nu_hedge`), which is the only source of
//! market-making edge in the model.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{mean, sample_std};
use crate::rng::{stream, stream_rng};

/// Parameters of the mid-price process and both venues' spread models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketConfig {
    /// Initial price S0.
    pub s0: f64,
    /// Drift per unit time.
    pub mu: f64,
    /// Flat volatility per unit time.
    pub sigma: f64,
    /// Steps per episode.
    pub n_steps: usize,
    /// Time increment; an episode spans `n_steps · dt` time units.
    pub dt: f64,
    /// Rolling-volatility window in steps.
    pub window: usize,
    /// Client-venue spread multiplier (wider side).
    pub nu_client: f64,
    /// Hedge-venue spread multiplier.
    pub nu_hedge: f64,
    /// Stochastic spread add-on multiplier γ.
    pub gamma_spread: f64,
    /// Spread clamp floor as a multiple of mean simulation volatility.
    pub spread_clamp_lo: f64,
    /// Spread clamp ceiling as a multiple of mean simulation volatility.
    pub spread_clamp_hi: f64,
    /// RNG seed for all market streams.
    pub seed: u64,
}

impl Default for MarketConfig {
    fn default() -> Self {
        let n_steps = 128;
        MarketConfig {
            s0: 100.0,
            mu: 0.0,
            sigma: 0.02,
            n_steps,
            dt: 1.0 / n_steps as f64,
            window: 20,
            nu_client: 1.5,
            nu_hedge: 1.0,
            gamma_spread: 0.5,
            spread_clamp_lo: 0.1,
            spread_clamp_hi: 2.5,
            seed: 0,
        }
    }
}

impl MarketConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0) {
            return Err(Error::Config(format!("market.s0 must be > 0, got {}", self.s0)));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config(format!("market.sigma must be >= 0, got {}", self.sigma)));
        }
        if self.n_steps < 2 {
            return Err(Error::Config(format!(
                "market.n_steps must be >= 2, got {}",
                self.n_steps
            )));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("market.dt must be > 0, got {}", self.dt)));
        }
        if self.window < 1 || self.window > self.n_steps {
            return Err(Error::Config(format!(
                "market.window must be in [1, n_steps], got {}",
                self.window
            )));
        }
        if !(self.nu_client >= 0.0) || !(self.nu_hedge >= 0.0) {
            return Err(Error::Config("spread multipliers must be >= 0".into()));
        }
        if !(self.gamma_spread >= 0.0) {
            return Err(Error::Config(format!(
                "market.gamma_spread must be >= 0, got {}",
                self.gamma_spread
            )));
        }
        if !(self.spread_clamp_lo > 0.0 && self.spread_clamp_lo < self.spread_clamp_hi) {
            return Err(Error::Config(format!(
                "spread clamps must satisfy 0 < lo < hi, got lo={} hi={}",
                self.spread_clamp_lo, self.spread_clamp_hi
            )));
        }
        Ok(())
    }

    /// Standard deviation of the log-normal spread add-on's underlying normal.
    pub fn spread_noise_scale(&self) -> f64 {
        self.gamma_spread * self.s0 * self.sigma / (self.n_steps as f64).sqrt()
    }
}

/// One episode of market data for a single asset.
///
/// `mid[0] = s0`; steps advance mid, spreads, and rolling volatility in
/// lockstep. Emitted spreads `*_delta` are the clamped per-side δ values, so
/// `client_bid = mid − nu_client·client_bid_delta` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketPath {
    pub mid: Vec<f64>,
    pub client_bid: Vec<f64>,
    pub client_ask: Vec<f64>,
    pub hedge_bid: Vec<f64>,
    pub hedge_ask: Vec<f64>,
    pub rolling_vol: Vec<f64>,
    /// Mean of `rolling_vol` over the episode (σ_mean).
    pub mean_vol: f64,
    pub client_bid_delta: Vec<f64>,
    pub client_ask_delta: Vec<f64>,
    pub hedge_bid_delta: Vec<f64>,
    pub hedge_ask_delta: Vec<f64>,
}

impl MarketPath {
    pub fn n_steps(&self) -> usize {
        self.mid.len()
    }
}

/// Pre-drawn standard-normal noise: `eps[draw][step]`.
///
/// Same (seed, stream) always reproduces the matrix bit-identically.
#[derive(Debug, Clone)]
pub struct NoiseDraws {
    pub eps: Vec<Vec<f64>>,
}

impl NoiseDraws {
    pub fn generate(seed: u64, stream_id: u64, n_draws: usize, n_steps: usize) -> Self {
        let mut rng = stream_rng(seed, stream_id);
        let eps = (0..n_draws)
            .map(|_| (0..n_steps).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        NoiseDraws { eps }
    }
}

/// Log-Euler mid-price path. `draws[t]` drives the increment into step `t`
/// (index 0 is unused since `mid[0] = s0`).
pub fn generate_mid_path(cfg: &MarketConfig, draws: &[f64]) -> Result<Vec<f64>> {
    if draws.len() != cfg.n_steps {
        return Err(Error::Param(format!(
            "mid path needs {} draws, got {}",
            cfg.n_steps,
            draws.len()
        )));
    }
    if let Some(bad) = draws.iter().find(|e| !e.is_finite()) {
        return Err(Error::Data(format!("non-finite noise draw: {bad}")));
    }
    let drift = (cfg.mu - 0.5 * cfg.sigma * cfg.sigma) * cfg.dt;
    let diffusion = cfg.sigma * cfg.dt.sqrt();
    let mut mid = Vec::with_capacity(cfg.n_steps);
    let mut log_s = cfg.s0.ln();
    mid.push(cfg.s0);
    for &eps in &draws[1..] {
        log_s += drift + diffusion * eps;
        mid.push(log_s.exp());
    }
    Ok(mid)
}

/// `ρ·ε₁ + √(1−ρ²)·ε` — correlates an independent draw with ε₁.
pub fn correlate(eps1: f64, eps_indep: f64, rho: f64) -> Result<f64> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::Param(format!("correlation must satisfy |rho| <= 1, got {rho}")));
    }
    Ok(rho * eps1 + (1.0 - rho * rho).sqrt() * eps_indep)
}

/// Rolling sample standard deviation of the mid-price levels over the last
/// `min(t+1, window)` points, scaled by `1/√n_steps`. Uses only data up to
/// and including `t`; single-point prefixes give 0.
pub fn rolling_volatility(mid: &[f64], window: usize, n_steps: usize) -> Vec<f64> {
    assert!(window >= 1, "window must be >= 1");
    let norm = (n_steps as f64).sqrt();
    (0..mid.len())
        .map(|t| {
            let k = window.min(t + 1);
            sample_std(&mid[t + 1 - k..=t]) / norm
        })
        .collect()
}

const SPREAD_SIDES: usize = 4; // client bid, client ask, hedge bid, hedge ask

/// Attach stochastic spreads to a mid path. `draws` must carry one row of
/// standard normals per side (client bid/ask, hedge bid/ask).
pub fn generate_spreads(
    cfg: &MarketConfig,
    mid: Vec<f64>,
    rolling_vol: Vec<f64>,
    draws: &NoiseDraws,
) -> Result<MarketPath> {
    let n = mid.len();
    if rolling_vol.len() != n || draws.eps.len() != SPREAD_SIDES || draws.eps.iter().any(|r| r.len() != n) {
        return Err(Error::Param("spread generation inputs must align".into()));
    }
    let mean_vol = mean(&rolling_vol);
    let (lo, hi) = (cfg.spread_clamp_lo * mean_vol, cfg.spread_clamp_hi * mean_vol);
    let noise_scale = cfg.spread_noise_scale();

    // δ per side: rolling vol plus a log-normal add-on, clamped to the
    // episode's volatility band.
    let deltas: Vec<Vec<f64>> = (0..SPREAD_SIDES)
        .map(|side| {
            (0..n)
                .map(|t| {
                    let raw = rolling_vol[t] + (noise_scale * draws.eps[side][t]).exp();
                    raw.clamp(lo, hi)
                })
                .collect()
        })
        .collect();

    let quote = |t: usize, nu: f64, delta: &Vec<f64>, sign: f64| mid[t] + sign * nu * delta[t];
    let client_bid: Vec<f64> = (0..n).map(|t| quote(t, cfg.nu_client, &deltas[0], -1.0)).collect();
    let client_ask: Vec<f64> = (0..n).map(|t| quote(t, cfg.nu_client, &deltas[1], 1.0)).collect();
    let hedge_bid: Vec<f64> = (0..n).map(|t| quote(t, cfg.nu_hedge, &deltas[2], -1.0)).collect();
    let hedge_ask: Vec<f64> = (0..n).map(|t| quote(t, cfg.nu_hedge, &deltas[3], 1.0)).collect();

    if let Some(t) = (0..n).find(|&t| client_bid[t] <= 0.0 || hedge_bid[t] <= 0.0) {
        return Err(Error::Config(format!(
            "non-positive bid at step {t} (mid {}, client bid {}, hedge bid {}); \
             spread configuration too wide for the price level",
            mid[t], client_bid[t], hedge_bid[t]
        )));
    }

    let [cb, ca, hb, ha]: [Vec<f64>; 4] = deltas.try_into().expect("four sides");
    Ok(MarketPath {
        mid,
        client_bid,
        client_ask,
        hedge_bid,
        hedge_ask,
        rolling_vol,
        mean_vol,
        client_bid_delta: cb,
        client_ask_delta: ca,
        hedge_bid_delta: hb,
        hedge_ask_delta: ha,
    })
}

/// Generate one or two complete market paths; for two assets the mid-price
/// log increments are correlated with coefficient `rho`.
pub fn generate_market(cfg: &MarketConfig, rho: f64, n_assets: usize) -> Result<Vec<MarketPath>> {
    match n_assets {
        1 => Ok(vec![generate_asset(cfg, cfg.seed, 0, None)?]),
        2 => {
            let (a, b) = generate_market_pair(cfg, cfg, rho)?;
            Ok(vec![a, b])
        }
        n => Err(Error::Param(format!("n_assets must be 1 or 2, got {n}"))),
    }
}

/// Correlated pair with per-asset configs. The first config's seed is the
/// master seed for both assets' streams.
pub fn generate_market_pair(
    cfg1: &MarketConfig,
    cfg2: &MarketConfig,
    rho: f64,
) -> Result<(MarketPath, MarketPath)> {
    if !(rho.abs() <= 1.0) {
        return Err(Error::Param(format!("correlation must satisfy |rho| <= 1, got {rho}")));
    }
    if cfg1.n_steps != cfg2.n_steps {
        return Err(Error::Config("paired assets must share n_steps".into()));
    }
    let seed = cfg1.seed;
    let eps1 = NoiseDraws::generate(seed, stream::MID, 1, cfg1.n_steps).eps.remove(0);
    let eps_ind = NoiseDraws::generate(seed, stream::MID + stream::ASSET_STRIDE, 1, cfg2.n_steps)
        .eps
        .remove(0);
    let eps2: Vec<f64> = eps1
        .iter()
        .zip(&eps_ind)
        .map(|(&e1, &ei)| correlate(e1, ei, rho))
        .collect::<Result<_>>()?;
    let a = generate_asset(cfg1, seed, 0, Some(&eps1))?;
    let b = generate_asset(cfg2, seed, 1, Some(&eps2))?;
    Ok((a, b))
}

fn generate_asset(
    cfg: &MarketConfig,
    seed: u64,
    asset: u64,
    mid_draws: Option<&[f64]>,
) -> Result<MarketPath> {
    cfg.validate()?;
    let offset = asset * stream::ASSET_STRIDE;
    let own_draws;
    let draws = match mid_draws {
        Some(d) => d,
        None => {
            own_draws = NoiseDraws::generate(seed, stream::MID + offset, 1, cfg.n_steps)
                .eps
                .remove(0);
            &own_draws
        }
    };
    let mid = generate_mid_path(cfg, draws)?;
    let vol = rolling_volatility(&mid, cfg.window, cfg.n_steps);
    let spread_draws =
        NoiseDraws::generate(seed, stream::SPREAD + offset, SPREAD_SIDES, cfg.n_steps);
    generate_spreads(cfg, mid, vol, &spread_draws)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_increments(mid: &[f64]) -> Vec<f64> {
        mid.windows(2).map(|w| (w[1] / w[0]).ln()).collect()
    }

    #[test]
    fn zero_volatility_mid_is_constant() {
        let cfg = MarketConfig { sigma: 0.0, mu: 0.0, n_steps: 16, ..Default::default() };
        let mid = generate_mid_path(&cfg, &vec![1.0; 16]).unwrap();
        assert!(mid.iter().all(|&m| (m - cfg.s0).abs() < 1e-12));
    }

    #[test]
    fn mid_single_step_hand_value() {
        // s0=100, σ=0.2, dt=1, ε=1: mid[1] = 100·exp(−0.02 + 0.2)
        let cfg = MarketConfig { sigma: 0.2, n_steps: 2, dt: 1.0, window: 2, ..Default::default() };
        let mid = generate_mid_path(&cfg, &[0.0, 1.0]).unwrap();
        assert!((mid[1] - 100.0 * (0.18f64).exp()).abs() < 1e-12);
        assert!((mid[1] - 119.721_736_312_181_02).abs() < 1e-9);
    }

    #[test]
    fn mid_rejects_non_finite_draw() {
        let cfg = MarketConfig { n_steps: 4, ..Default::default() };
        let err = generate_mid_path(&cfg, &[0.0, 1.0, f64::NAN, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn martingale_monte_carlo() {
        // μ=0 ⇒ E[S_N] = S0: mean over 10 000 paths within 3 SE.
        let cfg = MarketConfig { n_steps: 32, dt: 1.0 / 32.0, ..Default::default() };
        let finals: Vec<f64> = (0..10_000)
            .map(|s| {
                let c = MarketConfig { seed: s, ..cfg.clone() };
                let draws = NoiseDraws::generate(c.seed, stream::MID, 1, c.n_steps).eps.remove(0);
                *generate_mid_path(&c, &draws).unwrap().last().unwrap()
            })
            .collect();
        let m = mean(&finals);
        let se = sample_std(&finals) / (finals.len() as f64).sqrt();
        assert!(
            (m - cfg.s0).abs() <= 3.0 * se,
            "martingale violated: mean {m}, s0 {}, se {se}",
            cfg.s0
        );
    }

    #[test]
    fn correlate_trivial_and_hand_values() {
        assert_eq!(correlate(3.0, 9.0, 1.0).unwrap(), 3.0);
        assert_eq!(correlate(3.0, 9.0, 0.0).unwrap(), 9.0);
        let v = correlate(1.0, 2.0, 0.5).unwrap();
        assert!((v - (0.5 + 0.75f64.sqrt() * 2.0)).abs() < 1e-15);
        assert!((v - 2.232_050_807_568_877).abs() < 1e-6);
        assert!(matches!(correlate(0.0, 0.0, 1.5), Err(Error::Param(_))));
    }

    #[test]
    fn rolling_vol_constant_path_is_zero() {
        let v = rolling_volatility(&[100.0; 10], 4, 10);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rolling_vol_hand_value() {
        // stdev(100,102)/√4 = √2/2
        let v = rolling_volatility(&[100.0, 102.0], 2, 4);
        assert_eq!(v[0], 0.0);
        assert!((v[1] - 0.707_106_781_186_547_6).abs() < 1e-12);
    }

    #[test]
    fn rolling_vol_is_causal() {
        // Changing data after t must not change rolling_vol[..=t].
        let cfg = MarketConfig::default();
        let draws = NoiseDraws::generate(7, stream::MID, 1, cfg.n_steps).eps.remove(0);
        let mid = generate_mid_path(&cfg, &draws).unwrap();
        let full = rolling_volatility(&mid, cfg.window, cfg.n_steps);
        for t in [0usize, 3, 19, 64, 127] {
            let prefix = rolling_volatility(&mid[..=t], cfg.window, cfg.n_steps);
            assert_eq!(prefix[t], full[t], "rolling_vol[{t}] depends on the future");
        }
    }

    #[test]
    fn spreads_obey_clamp_and_order() {
        let cfg = MarketConfig { seed: 11, ..Default::default() };
        let path = generate_market(&cfg, 0.0, 1).unwrap().remove(0);
        let (lo, hi) = (
            cfg.spread_clamp_lo * path.mean_vol,
            cfg.spread_clamp_hi * path.mean_vol,
        );
        for t in 0..path.n_steps() {
            for d in [
                path.client_bid_delta[t],
                path.client_ask_delta[t],
                path.hedge_bid_delta[t],
                path.hedge_ask_delta[t],
            ] {
                assert!(d >= lo && d <= hi, "delta {d} outside [{lo}, {hi}]");
            }
            assert!(path.client_bid[t] < path.mid[t] && path.mid[t] < path.client_ask[t]);
            assert!(path.hedge_bid[t] < path.mid[t] && path.mid[t] < path.hedge_ask[t]);
            // Client venue is the wide one.
            assert!(path.mid[t] - path.client_bid[t] > path.mid[t] - path.hedge_bid[t] - 1e-12 * cfg.s0);
        }
    }

    #[test]
    fn clamp_ceiling_is_exact_on_oversized_draws() {
        // A raw δ far above the ceiling must be emitted exactly at the ceiling.
        let cfg = MarketConfig { gamma_spread: 50.0, seed: 3, ..Default::default() };
        let path = generate_market(&cfg, 0.0, 1).unwrap().remove(0);
        let hi = cfg.spread_clamp_hi * path.mean_vol;
        // Recompute raw deltas and check every clamped one matches the bound.
        let draws = NoiseDraws::generate(cfg.seed, stream::SPREAD, SPREAD_SIDES, cfg.n_steps);
        let scale = cfg.spread_noise_scale();
        let mut saw_clamped = false;
        for t in 0..cfg.n_steps {
            let raw = path.rolling_vol[t] + (scale * draws.eps[0][t]).exp();
            if raw > hi {
                saw_clamped = true;
                assert_eq!(path.client_bid_delta[t], hi);
            }
        }
        assert!(saw_clamped, "test config must actually trigger the ceiling");
    }

    #[test]
    fn zero_nu_collapses_client_spread() {
        let cfg = MarketConfig { nu_client: 0.0, seed: 5, ..Default::default() };
        let path = generate_market(&cfg, 0.0, 1).unwrap().remove(0);
        for t in 0..path.n_steps() {
            assert_eq!(path.client_bid[t], path.mid[t]);
            assert_eq!(path.client_ask[t], path.mid[t]);
        }
    }

    #[test]
    fn generate_market_is_reproducible() {
        let cfg = MarketConfig { seed: 99, ..Default::default() };
        let a = generate_market(&cfg, 0.0, 1).unwrap();
        let b = generate_market(&cfg, 0.0, 1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_give_different_paths() {
        let a = generate_market(&MarketConfig { seed: 1, ..Default::default() }, 0.0, 1).unwrap();
        let b = generate_market(&MarketConfig { seed: 2, ..Default::default() }, 0.0, 1).unwrap();
        assert!(a[0].mid[..8] != b[0].mid[..8]);
    }

    #[test]
    fn perfect_correlation_duplicates_mids() {
        // High sigma/gamma so the spread add-on lands inside the clamp band
        // (at defaults every δ rails at the ceiling and spreads degenerate).
        let cfg = MarketConfig { seed: 17, sigma: 0.2, gamma_spread: 2.0, ..Default::default() };
        let pair = generate_market(&cfg, 1.0, 2).unwrap();
        assert_eq!(pair[0].mid, pair[1].mid);
        // Spreads still draw from independent streams.
        assert_ne!(pair[0].client_bid, pair[1].client_bid);
    }

    #[test]
    fn pair_correlation_matches_rho() {
        for rho in [0.0, 0.8] {
            let cfg = MarketConfig {
                n_steps: 10_000,
                dt: 1e-4,
                window: 20,
                seed: 23,
                ..Default::default()
            };
            let pair = generate_market(&cfg, rho, 2).unwrap();
            let r1 = log_increments(&pair[0].mid);
            let r2 = log_increments(&pair[1].mid);
            let c = crate::metrics::sample_corr(&r1, &r2).unwrap();
            assert!((c - rho).abs() < 0.05, "rho {rho}: sample correlation {c}");
        }
    }

    #[test]
    fn log_variance_matches_sigma() {
        // A path of n points carries n−1 increments:
        // Var[log(S_last/S0)] = σ²·(n−1)·Δt within 5% over 10 000 paths.
        let cfg = MarketConfig { n_steps: 32, dt: 1.0 / 32.0, ..Default::default() };
        let logs: Vec<f64> = (0..10_000)
            .map(|s| {
                let c = MarketConfig { seed: s, ..cfg.clone() };
                let draws = NoiseDraws::generate(c.seed, stream::MID, 1, c.n_steps).eps.remove(0);
                let mid = generate_mid_path(&c, &draws).unwrap();
                (mid.last().unwrap() / cfg.s0).ln()
            })
            .collect();
        let target = cfg.sigma * cfg.sigma * (cfg.n_steps - 1) as f64 * cfg.dt;
        let v = crate::metrics::sample_var(&logs);
        assert!(
            (v - target).abs() / target < 0.05,
            "log variance {v} vs target {target}"
        );
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let bad = [
            MarketConfig { s0: 0.0, ..Default::default() },
            MarketConfig { sigma: -0.1, ..Default::default() },
            MarketConfig { n_steps: 1, ..Default::default() },
            MarketConfig { window: 0, ..Default::default() },
            MarketConfig { window: 500, ..Default::default() },
            MarketConfig { spread_clamp_lo: 0.0, ..Default::default() },
            MarketConfig { spread_clamp_lo: 3.0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(generate_market(&cfg, 0.0, 1).is_err(), "accepted {cfg:?}");
        }
    }
}
