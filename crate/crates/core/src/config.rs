//! Experiment configuration: flat key–value text with section prefixes.
//!
//! ```text
//! # comment
//! mode = single
//! market.sigma = 0.02
//! sac.hidden = 256,256
//! ```
//!
//! Precedence: mode preset ← config file ← `HEDGELAB_*` environment
//! variables ← `--set key=value` flags. The `mode` key is read first and
//! selects the preset the remaining keys patch. Unknown keys are rejected.
//! `parse → serialize → parse` is a fixed point (floats print in shortest
//! round-trip form).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::env::{EnvConfig, Mode, PortfolioConfig};
use crate::error::{Error, Result};
use crate::sac::SacHyper;

/// Environment-variable override prefix: `market.n_steps` becomes
/// `HEDGELAB_MARKET_N_STEPS`.
pub const ENV_PREFIX: &str = "HEDGELAB_";

/// Experiment kind; `dummy` and `random` are the untrained baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    Single,
    Skew,
    PriceOfRisk,
    Portfolio,
    Dummy,
    Random,
}

impl ExperimentMode {
    pub fn is_portfolio(self) -> bool {
        matches!(self, ExperimentMode::Portfolio)
    }

    pub fn is_trained(self) -> bool {
        !matches!(self, ExperimentMode::Dummy | ExperimentMode::Random)
    }

    fn env_mode(self) -> Mode {
        match self {
            ExperimentMode::Skew => Mode::Skew,
            ExperimentMode::PriceOfRisk => Mode::PriceOfRisk,
            _ => Mode::Single,
        }
    }
}

impl fmt::Display for ExperimentMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ExperimentMode::Single => "single",
            ExperimentMode::Skew => "skew",
            ExperimentMode::PriceOfRisk => "price_of_risk",
            ExperimentMode::Portfolio => "portfolio",
            ExperimentMode::Dummy => "dummy",
            ExperimentMode::Random => "random",
        };
        f.write_str(s)
    }
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(ExperimentMode::Single),
            "skew" => Ok(ExperimentMode::Skew),
            "price_of_risk" => Ok(ExperimentMode::PriceOfRisk),
            "portfolio" => Ok(ExperimentMode::Portfolio),
            "dummy" => Ok(ExperimentMode::Dummy),
            "random" => Ok(ExperimentMode::Random),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected single, skew, price_of_risk, portfolio, dummy, random)"
            ))),
        }
    }
}

/// Full experiment description. The `env` section holds the (first) asset's
/// market and flow; the `portfolio` section's own market1/flow1 slots are
/// placeholders overwritten from `env` when the portfolio config is built.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: ExperimentMode,
    pub seed: u64,
    pub eval_episodes: usize,
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub portfolio: PortfolioConfig,
    pub hyper: SacHyper,
}

impl ExperimentConfig {
    /// Tuned starting point per mode; config keys patch it.
    pub fn preset(mode: ExperimentMode) -> Self {
        let mut env = EnvConfig { mode: mode.env_mode(), ..Default::default() };
        let mut portfolio = PortfolioConfig::default();
        let mut hyper = SacHyper::default();
        // Desk-scale flow: ~10 trades/side/step against hedge bound 10,
        // mild intensity skew so positions are controllable.
        env.flow.c_scale = 10.0;
        env.flow.beta_flow = 0.15;
        hyper.reward_scale = 0.01;
        hyper.epochs = 30;
        let mut eval_episodes = 50;
        match mode {
            // The single-asset preset keeps the desk-scale 256×256 network;
            // the other tasks are as low-dimensional and train with 64×64
            // nets in a fraction of the time.
            ExperimentMode::Single => {}
            ExperimentMode::Skew => {
                hyper.hidden = vec![64, 64];
                hyper.epochs = 40;
            }
            ExperimentMode::PriceOfRisk => {
                // Wide client quotes against balanced exogenous flow: the
                // spread income the skew action gives up is the measurable
                // quantity, so flow must not react to price moves. Flow is
                // sized so hedge volume can match client volume, and the
                // penalty is light so the spread-imbalance term dominates
                // the reward instead of position control.
                env.market.nu_client = 2.0;
                env.flow.c_scale = 5.0;
                env.flow.beta_flow = 0.0;
                env.gamma_penalty = 0.01;
                env.terminal_extra_penalty = env.gamma_penalty
                    * env.market.s0
                    * (env.termination_multiple.exp() - 1.0)
                    * env.max_pos_limit;
                // The reward is symmetric in ±skew, so a fixed temperature
                // pins the squashed policy at its max-entropy width around
                // zero skew; annealing α and speeding up the policy steps
                // lets it commit to either rail.
                hyper.auto_alpha = true;
                hyper.lr_policy = 1e-3;
                hyper.hidden = vec![64, 64];
                hyper.epochs = 100;
            }
            ExperimentMode::Portfolio => {
                // Client flow each single hedge book can absorb; with spare
                // capacity the split across assets is decided by the reward
                // and not by tracking speed. The small fixed temperature
                // keeps hedge ratios precise enough for the variance
                // difference between the books to register.
                env.flow.c_scale = 5.0;
                for f in [&mut portfolio.flow1, &mut portfolio.flow2] {
                    f.c_scale = 5.0;
                    f.beta_flow = 0.15;
                }
                hyper.alpha = 0.05;
                hyper.hidden = vec![64, 64];
                hyper.epochs = 100;
            }
            ExperimentMode::Dummy | ExperimentMode::Random => {
                eval_episodes = 100;
            }
        }
        ExperimentConfig {
            mode,
            seed: 0,
            eval_episodes,
            out_dir: PathBuf::from(format!("runs/{mode}")),
            env,
            portfolio,
            hyper,
        }
    }

    /// Parse config text; the preset comes from the `mode` key (default
    /// `single`), every other key patches it in file order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut mode = ExperimentMode::Single;
        for (key, value) in iter_pairs(text)? {
            if key == "mode" {
                mode = value.parse()?;
            }
        }
        let mut cfg = ExperimentConfig::preset(mode);
        for (key, value) in iter_pairs(text)? {
            cfg.apply_key(&key, &value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Build from every source in precedence order. `env_vars` is the
    /// process environment (or a stand-in for tests); `sets` are `--set`
    /// pairs.
    pub fn from_sources<I>(path: Option<&Path>, env_vars: I, sets: &[(String, String)]) -> Result<Self>
    where
        I: Iterator<Item = (String, String)>,
    {
        // mode may come from any layer, so resolve it across all of them
        let file_text = match path {
            Some(p) => Some(std::fs::read_to_string(p)?),
            None => None,
        };
        let env_pairs: Vec<(String, String)> = env_vars
            .filter(|(k, _)| k.starts_with(ENV_PREFIX))
            .map(|(k, v)| Ok((env_var_to_key(&k)?, v)))
            .collect::<Result<_>>()?;
        let mut mode = ExperimentMode::Single;
        if let Some(text) = &file_text {
            for (k, v) in iter_pairs(text)? {
                if k == "mode" {
                    mode = v.parse()?;
                }
            }
        }
        for (k, v) in env_pairs.iter().chain(sets.iter()) {
            if k == "mode" {
                mode = v.parse()?;
            }
        }
        let mut cfg = ExperimentConfig::preset(mode);
        if let Some(text) = &file_text {
            for (k, v) in iter_pairs(text)? {
                cfg.apply_key(&k, &v)?;
            }
        }
        for (k, v) in env_pairs.iter().chain(sets.iter()) {
            cfg.apply_key(k, v)?;
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        if self.mode.is_portfolio() {
            self.build_portfolio()?.validate()
        } else {
            self.build_env()?.validate()
        }
    }

    /// Single-asset environment config with the seed injected.
    pub fn build_env(&self) -> Result<EnvConfig> {
        if self.mode.is_portfolio() {
            return Err(Error::Config("portfolio mode has no single-asset environment".into()));
        }
        let mut env = self.env.clone();
        env.mode = self.mode.env_mode();
        env.market.seed = self.seed;
        Ok(env.normalized())
    }

    /// Two-asset portfolio config; asset 1 comes from the `market.`/`flow.`
    /// sections, asset 2 from `market2.`/`flow2.`.
    pub fn build_portfolio(&self) -> Result<PortfolioConfig> {
        if !self.mode.is_portfolio() {
            return Err(Error::Config(format!("mode {} is not portfolio", self.mode)));
        }
        let mut p = self.portfolio.clone();
        p.market1 = self.env.market.clone();
        p.market1.seed = self.seed;
        p.flow1 = self.env.flow.clone();
        p.flow1.max_hedge_size = p.max_hedge_size;
        p.flow2.max_hedge_size = p.max_hedge_size;
        Ok(p)
    }

    /// Apply one `key = value` override.
    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let fail = |what: &str| Error::Config(format!("key '{key}': invalid {what} '{v}'"));
        let f = || v.parse::<f64>().map_err(|_| fail("number"));
        let u = || v.parse::<u64>().map_err(|_| fail("integer"));
        let n = || v.parse::<usize>().map_err(|_| fail("integer"));
        let b = || v.parse::<bool>().map_err(|_| fail("boolean"));
        match key {
            "mode" => {
                self.mode = v.parse()?;
                self.env.mode = self.mode.env_mode();
            }
            "seed" => self.seed = u()?,
            "eval_episodes" => self.eval_episodes = n()?,
            "out_dir" => self.out_dir = PathBuf::from(v),

            "env.max_hedge_size" => self.env.max_hedge_size = f()?,
            "env.max_pos_limit" => self.env.max_pos_limit = f()?,
            "env.gamma_penalty" => self.env.gamma_penalty = f()?,
            "env.termination_multiple" => self.env.termination_multiple = f()?,
            "env.terminal_extra_penalty" => self.env.terminal_extra_penalty = f()?,
            "env.literal_price_of_risk" => self.env.literal_price_of_risk = b()?,
            "env.maker_taker_window" => self.env.maker_taker_window = n()?,

            "market.s0" => self.env.market.s0 = f()?,
            "market.mu" => self.env.market.mu = f()?,
            "market.sigma" => self.env.market.sigma = f()?,
            "market.n_steps" => self.env.market.n_steps = n()?,
            "market.dt" => self.env.market.dt = f()?,
            "market.window" => self.env.market.window = n()?,
            "market.nu_client" => self.env.market.nu_client = f()?,
            "market.nu_hedge" => self.env.market.nu_hedge = f()?,
            "market.gamma_spread" => self.env.market.gamma_spread = f()?,
            "market.spread_clamp_lo" => self.env.market.spread_clamp_lo = f()?,
            "market.spread_clamp_hi" => self.env.market.spread_clamp_hi = f()?,

            "flow.c_scale" => self.env.flow.c_scale = f()?,
            "flow.alpha_flow" => self.env.flow.alpha_flow = f()?,
            "flow.beta_flow" => self.env.flow.beta_flow = f()?,
            "flow.rho_flow" => self.env.flow.rho_flow = f()?,
            "flow.beta_skew" => self.env.flow.beta_skew = f()?,
            "flow.intensity_smoothing_window" => self.env.flow.intensity_smoothing_window = n()?,

            "portfolio.w" => self.portfolio.w = f()?,
            "portfolio.rho" => self.portfolio.rho = f()?,
            "portfolio.phi" => self.portfolio.phi = f()?,
            "portfolio.gamma_penalty" => self.portfolio.gamma_penalty = f()?,
            "portfolio.max_pos_limit" => self.portfolio.max_pos_limit = f()?,
            "portfolio.max_hedge_size" => self.portfolio.max_hedge_size = f()?,
            "portfolio.convex_parametrization" => self.portfolio.convex_parametrization = b()?,
            "portfolio.termination_multiple" => self.portfolio.termination_multiple = f()?,
            "portfolio.terminal_extra_penalty" => self.portfolio.terminal_extra_penalty = f()?,

            "market2.s0" => self.portfolio.market2.s0 = f()?,
            "market2.mu" => self.portfolio.market2.mu = f()?,
            "market2.sigma" => self.portfolio.market2.sigma = f()?,
            "market2.n_steps" => self.portfolio.market2.n_steps = n()?,
            "market2.dt" => self.portfolio.market2.dt = f()?,
            "market2.window" => self.portfolio.market2.window = n()?,
            "market2.nu_client" => self.portfolio.market2.nu_client = f()?,
            "market2.nu_hedge" => self.portfolio.market2.nu_hedge = f()?,
            "market2.gamma_spread" => self.portfolio.market2.gamma_spread = f()?,
            "market2.spread_clamp_lo" => self.portfolio.market2.spread_clamp_lo = f()?,
            "market2.spread_clamp_hi" => self.portfolio.market2.spread_clamp_hi = f()?,

            "flow2.c_scale" => self.portfolio.flow2.c_scale = f()?,
            "flow2.alpha_flow" => self.portfolio.flow2.alpha_flow = f()?,
            "flow2.beta_flow" => self.portfolio.flow2.beta_flow = f()?,
            "flow2.rho_flow" => self.portfolio.flow2.rho_flow = f()?,
            "flow2.beta_skew" => self.portfolio.flow2.beta_skew = f()?,
            "flow2.intensity_smoothing_window" => {
                self.portfolio.flow2.intensity_smoothing_window = n()?
            }

            "sac.gamma" => self.hyper.gamma = f()?,
            "sac.alpha" => self.hyper.alpha = f()?,
            "sac.auto_alpha" => self.hyper.auto_alpha = b()?,
            "sac.target_entropy" => {
                self.hyper.target_entropy = if v == "none" { None } else { Some(f()?) }
            }
            "sac.tau" => self.hyper.tau = f()?,
            "sac.lr_policy" => self.hyper.lr_policy = f()?,
            "sac.lr_q" => self.hyper.lr_q = f()?,
            "sac.lr_alpha" => self.hyper.lr_alpha = f()?,
            "sac.batch_size" => self.hyper.batch_size = n()?,
            "sac.replay_capacity" => self.hyper.replay_capacity = n()?,
            "sac.warmup_steps" => self.hyper.warmup_steps = n()?,
            "sac.updates_per_step" => self.hyper.updates_per_step = n()?,
            "sac.epochs" => self.hyper.epochs = n()?,
            "sac.steps_per_epoch" => self.hyper.steps_per_epoch = n()?,
            "sac.hidden" => {
                let sizes: std::result::Result<Vec<usize>, _> =
                    v.split(',').map(|s| s.trim().parse::<usize>()).collect();
                self.hyper.hidden = sizes.map_err(|_| fail("size list"))?;
            }
            "sac.reward_scale" => self.hyper.reward_scale = f()?,

            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Canonical serialization: every key, fixed order, shortest
    /// round-trip float form.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let kv = |s: &mut String, k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        let ff = |x: f64| format!("{x:?}");
        kv(&mut s, "mode", self.mode.to_string());
        kv(&mut s, "seed", self.seed.to_string());
        kv(&mut s, "eval_episodes", self.eval_episodes.to_string());
        kv(&mut s, "out_dir", self.out_dir.display().to_string());

        kv(&mut s, "env.max_hedge_size", ff(self.env.max_hedge_size));
        kv(&mut s, "env.max_pos_limit", ff(self.env.max_pos_limit));
        kv(&mut s, "env.gamma_penalty", ff(self.env.gamma_penalty));
        kv(&mut s, "env.termination_multiple", ff(self.env.termination_multiple));
        kv(&mut s, "env.terminal_extra_penalty", ff(self.env.terminal_extra_penalty));
        kv(&mut s, "env.literal_price_of_risk", self.env.literal_price_of_risk.to_string());
        kv(&mut s, "env.maker_taker_window", self.env.maker_taker_window.to_string());

        for (prefix, m) in [("market", &self.env.market), ("market2", &self.portfolio.market2)] {
            kv(&mut s, &format!("{prefix}.s0"), ff(m.s0));
            kv(&mut s, &format!("{prefix}.mu"), ff(m.mu));
            kv(&mut s, &format!("{prefix}.sigma"), ff(m.sigma));
            kv(&mut s, &format!("{prefix}.n_steps"), m.n_steps.to_string());
            kv(&mut s, &format!("{prefix}.dt"), ff(m.dt));
            kv(&mut s, &format!("{prefix}.window"), m.window.to_string());
            kv(&mut s, &format!("{prefix}.nu_client"), ff(m.nu_client));
            kv(&mut s, &format!("{prefix}.nu_hedge"), ff(m.nu_hedge));
            kv(&mut s, &format!("{prefix}.gamma_spread"), ff(m.gamma_spread));
            kv(&mut s, &format!("{prefix}.spread_clamp_lo"), ff(m.spread_clamp_lo));
            kv(&mut s, &format!("{prefix}.spread_clamp_hi"), ff(m.spread_clamp_hi));
        }
        for (prefix, fl) in [("flow", &self.env.flow), ("flow2", &self.portfolio.flow2)] {
            kv(&mut s, &format!("{prefix}.c_scale"), ff(fl.c_scale));
            kv(&mut s, &format!("{prefix}.alpha_flow"), ff(fl.alpha_flow));
            kv(&mut s, &format!("{prefix}.beta_flow"), ff(fl.beta_flow));
            kv(&mut s, &format!("{prefix}.rho_flow"), ff(fl.rho_flow));
            kv(&mut s, &format!("{prefix}.beta_skew"), ff(fl.beta_skew));
            kv(
                &mut s,
                &format!("{prefix}.intensity_smoothing_window"),
                fl.intensity_smoothing_window.to_string(),
            );
        }

        kv(&mut s, "portfolio.w", ff(self.portfolio.w));
        kv(&mut s, "portfolio.rho", ff(self.portfolio.rho));
        kv(&mut s, "portfolio.phi", ff(self.portfolio.phi));
        kv(&mut s, "portfolio.gamma_penalty", ff(self.portfolio.gamma_penalty));
        kv(&mut s, "portfolio.max_pos_limit", ff(self.portfolio.max_pos_limit));
        kv(&mut s, "portfolio.max_hedge_size", ff(self.portfolio.max_hedge_size));
        kv(
            &mut s,
            "portfolio.convex_parametrization",
            self.portfolio.convex_parametrization.to_string(),
        );
        kv(&mut s, "portfolio.termination_multiple", ff(self.portfolio.termination_multiple));
        kv(&mut s, "portfolio.terminal_extra_penalty", ff(self.portfolio.terminal_extra_penalty));

        kv(&mut s, "sac.gamma", ff(self.hyper.gamma));
        kv(&mut s, "sac.alpha", ff(self.hyper.alpha));
        kv(&mut s, "sac.auto_alpha", self.hyper.auto_alpha.to_string());
        kv(
            &mut s,
            "sac.target_entropy",
            self.hyper.target_entropy.map_or("none".to_string(), ff),
        );
        kv(&mut s, "sac.tau", ff(self.hyper.tau));
        kv(&mut s, "sac.lr_policy", ff(self.hyper.lr_policy));
        kv(&mut s, "sac.lr_q", ff(self.hyper.lr_q));
        kv(&mut s, "sac.lr_alpha", ff(self.hyper.lr_alpha));
        kv(&mut s, "sac.batch_size", self.hyper.batch_size.to_string());
        kv(&mut s, "sac.replay_capacity", self.hyper.replay_capacity.to_string());
        kv(&mut s, "sac.warmup_steps", self.hyper.warmup_steps.to_string());
        kv(&mut s, "sac.updates_per_step", self.hyper.updates_per_step.to_string());
        kv(&mut s, "sac.epochs", self.hyper.epochs.to_string());
        kv(&mut s, "sac.steps_per_epoch", self.hyper.steps_per_epoch.to_string());
        kv(
            &mut s,
            "sac.hidden",
            self.hyper
                .hidden
                .iter()
                .map(|h| h.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        kv(&mut s, "sac.reward_scale", ff(self.hyper.reward_scale));
        s
    }
}

/// Split config text into trimmed `(key, value)` pairs; `#` comments and
/// blank lines are skipped.
pub fn iter_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value', got '{line}'", lineno + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Keys recognized by [`ExperimentConfig::apply_key`], for env-var mapping.
const KEYS: &[&str] = &[
    "mode",
    "seed",
    "eval_episodes",
    "out_dir",
    "env.max_hedge_size",
    "env.max_pos_limit",
    "env.gamma_penalty",
    "env.termination_multiple",
    "env.terminal_extra_penalty",
    "env.literal_price_of_risk",
    "env.maker_taker_window",
    "market.s0",
    "market.mu",
    "market.sigma",
    "market.n_steps",
    "market.dt",
    "market.window",
    "market.nu_client",
    "market.nu_hedge",
    "market.gamma_spread",
    "market.spread_clamp_lo",
    "market.spread_clamp_hi",
    "market2.s0",
    "market2.mu",
    "market2.sigma",
    "market2.n_steps",
    "market2.dt",
    "market2.window",
    "market2.nu_client",
    "market2.nu_hedge",
    "market2.gamma_spread",
    "market2.spread_clamp_lo",
    "market2.spread_clamp_hi",
    "flow.c_scale",
    "flow.alpha_flow",
    "flow.beta_flow",
    "flow.rho_flow",
    "flow.beta_skew",
    "flow.intensity_smoothing_window",
    "flow2.c_scale",
    "flow2.alpha_flow",
    "flow2.beta_flow",
    "flow2.rho_flow",
    "flow2.beta_skew",
    "flow2.intensity_smoothing_window",
    "portfolio.w",
    "portfolio.rho",
    "portfolio.phi",
    "portfolio.gamma_penalty",
    "portfolio.max_pos_limit",
    "portfolio.max_hedge_size",
    "portfolio.convex_parametrization",
    "portfolio.termination_multiple",
    "portfolio.terminal_extra_penalty",
    "sac.gamma",
    "sac.alpha",
    "sac.auto_alpha",
    "sac.target_entropy",
    "sac.tau",
    "sac.lr_policy",
    "sac.lr_q",
    "sac.lr_alpha",
    "sac.batch_size",
    "sac.replay_capacity",
    "sac.warmup_steps",
    "sac.updates_per_step",
    "sac.epochs",
    "sac.steps_per_epoch",
    "sac.hidden",
    "sac.reward_scale",
];

fn env_var_to_key(var: &str) -> Result<String> {
    let body = &var[ENV_PREFIX.len()..];
    for key in KEYS {
        if key.to_uppercase().replace('.', "_") == body {
            return Ok(key.to_string());
        }
    }
    Err(Error::Config(format!("unknown environment override '{var}'")))
}
