//! Python extension module: experiment configs, the hedging environments,
//! SAC training, checkpoint evaluation, comparison, and dashboard export.
//!
//! Errors map onto Python exceptions by origin: configuration and parameter
//! errors raise `ValueError`, I/O failures raise `OSError`, everything else
//! raises `RuntimeError`.

use std::path::{Path, PathBuf};

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use hedgelab::env::{Environment, HedgeEnv, PortfolioEnv, StepRecord};
use hedgelab::metrics;
use hedgelab::runner::{self, ComparisonReport, EvalSummary};
use hedgelab::sac::{self, EpochMetrics, SacAgent};
use hedgelab::{Error, ExperimentConfig};

fn to_py(e: Error) -> PyErr {
    let msg = e.to_string();
    match e {
        Error::Config(_) | Error::Param(_) => PyValueError::new_err(msg),
        Error::Io(_) => PyIOError::new_err(msg),
        _ => PyRuntimeError::new_err(msg),
    }
}

/// Experiment configuration: a mode preset patched by key/value overrides.
#[pyclass(name = "ExperimentConfig", skip_from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    /// Preset for a mode: single, skew, price_of_risk, portfolio, dummy,
    /// or random.
    #[new]
    #[pyo3(signature = (mode = "single"))]
    fn new(mode: &str) -> PyResult<Self> {
        let mode = mode.parse().map_err(to_py)?;
        Ok(PyConfig { inner: ExperimentConfig::preset(mode) })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::load(&path).map_err(to_py)? })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyConfig { inner: ExperimentConfig::parse(text).map_err(to_py)? })
    }

    /// Apply one `key = value` override, e.g. `set("market.sigma", "0.02")`.
    fn set(&mut self, key: &str, value: &str) -> PyResult<()> {
        self.inner.apply_key(key, value).map_err(to_py)
    }

    /// Canonical config text; parsing it back is a fixed point.
    fn to_text(&self) -> String {
        self.inner.to_config_string()
    }

    #[getter]
    fn mode(&self) -> String {
        self.inner.mode.to_string()
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn get_epochs(&self) -> usize {
        self.inner.hyper.epochs
    }

    #[setter]
    fn set_epochs(&mut self, epochs: usize) {
        self.inner.hyper.epochs = epochs;
    }

    #[getter]
    fn get_eval_episodes(&self) -> usize {
        self.inner.eval_episodes
    }

    #[setter]
    fn set_eval_episodes(&mut self, n: usize) {
        self.inner.eval_episodes = n;
    }

    #[getter]
    fn get_out_dir(&self) -> PathBuf {
        self.inner.out_dir.clone()
    }

    #[setter]
    fn set_out_dir(&mut self, dir: PathBuf) {
        self.inner.out_dir = dir;
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig(mode={}, seed={})", self.inner.mode, self.inner.seed)
    }
}

fn record_dict<'py>(py: Python<'py>, r: &StepRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("step", r.step)?;
    d.set_item("mid", r.mid)?;
    d.set_item("client_bid", r.client_bid)?;
    d.set_item("client_ask", r.client_ask)?;
    d.set_item("hedge_bid", r.hedge_bid)?;
    d.set_item("hedge_ask", r.hedge_ask)?;
    d.set_item("client_bid_size", r.client_bid_size)?;
    d.set_item("client_ask_size", r.client_ask_size)?;
    d.set_item("action_hedge", r.action_hedge)?;
    d.set_item("action_skew", r.action_skew)?;
    d.set_item("client_pos", r.client_pos)?;
    d.set_item("hedge_pos", r.hedge_pos)?;
    d.set_item("net_pos", r.net_pos)?;
    d.set_item("client_pnl", r.client_pnl)?;
    d.set_item("hedge_pnl", r.hedge_pnl)?;
    d.set_item("market_pnl", r.market_pnl)?;
    d.set_item("net_pnl", r.net_pnl)?;
    d.set_item("penalty", r.penalty)?;
    d.set_item("reward", r.reward)?;
    d.set_item("done", r.done)?;
    if r.maker_spread.is_some() || r.taker_spread.is_some() {
        d.set_item("maker_spread", r.maker_spread)?;
        d.set_item("taker_spread", r.taker_spread)?;
    }
    Ok(d)
}

/// Single-asset hedging environment (modes single, skew, price_of_risk).
#[pyclass(name = "HedgeEnv")]
struct PyHedgeEnv {
    inner: HedgeEnv,
}

#[pymethods]
impl PyHedgeEnv {
    #[new]
    fn new(cfg: &PyConfig) -> PyResult<Self> {
        let env_cfg = cfg.inner.build_env().map_err(to_py)?;
        Ok(PyHedgeEnv { inner: HedgeEnv::new(&env_cfg).map_err(to_py)? })
    }

    /// Regenerate market and flow from `seed` and return the first
    /// observation.
    fn reset(&mut self, seed: u64) -> PyResult<Vec<f64>> {
        self.inner.reset(seed).map_err(to_py)
    }

    /// Returns `(obs, reward, done, timeout)`.
    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, bool)> {
        let out = self.inner.step(&action).map_err(to_py)?;
        Ok((out.obs, out.reward, out.done, out.timeout))
    }

    /// Flatten-the-position baseline action for the current state.
    fn heuristic_action(&self) -> Vec<f64> {
        let a = self.inner.heuristic();
        let mut v = vec![a.hedge_size];
        if self.inner.cfg().mode.has_skew() {
            v.push(a.skew);
        }
        v
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn act_dim(&self) -> usize {
        self.inner.act_dim()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.inner.bounds()
    }

    /// Episode step records as a list of dicts (one CSV row each).
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = self
            .inner
            .records()
            .iter()
            .map(|r| record_dict(py, r))
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, rows)
    }
}

/// Two-asset portfolio environment.
#[pyclass(name = "PortfolioEnv")]
struct PyPortfolioEnv {
    inner: PortfolioEnv,
}

#[pymethods]
impl PyPortfolioEnv {
    #[new]
    fn new(cfg: &PyConfig) -> PyResult<Self> {
        let pcfg = cfg.inner.build_portfolio().map_err(to_py)?;
        Ok(PyPortfolioEnv { inner: PortfolioEnv::new(&pcfg).map_err(to_py)? })
    }

    fn reset(&mut self, seed: u64) -> PyResult<Vec<f64>> {
        self.inner.reset(seed).map_err(to_py)
    }

    /// Returns `(obs, reward, done, timeout)`.
    fn step(&mut self, action: Vec<f64>) -> PyResult<(Vec<f64>, f64, bool, bool)> {
        let out = self.inner.step(&action).map_err(to_py)?;
        Ok((out.obs, out.reward, out.done, out.timeout))
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim()
    }

    #[getter]
    fn act_dim(&self) -> usize {
        self.inner.act_dim()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.inner.bounds()
    }

    /// Base-schema columns plus the per-asset extension fields.
    fn records<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows = self
            .inner
            .records()
            .iter()
            .map(|r| {
                let d = record_dict(py, &r.base)?;
                d.set_item("mid1", r.mid1)?;
                d.set_item("mid2", r.mid2)?;
                d.set_item("blended_mid", r.blended_mid)?;
                d.set_item("hedge1_pos", r.hedge1_pos)?;
                d.set_item("hedge2_pos", r.hedge2_pos)?;
                d.set_item("hedge1_pnl", r.hedge1_pnl)?;
                d.set_item("hedge2_pnl", r.hedge2_pnl)?;
                d.set_item("portfolio_value", r.portfolio_value)?;
                d.set_item("overhedge", r.overhedge)?;
                Ok(d)
            })
            .collect::<PyResult<Vec<_>>>()?;
        PyList::new(py, rows)
    }
}

/// Trained soft actor-critic agent.
#[pyclass(name = "SacAgent")]
struct PyAgent {
    inner: SacAgent,
    config_text: String,
}

#[pymethods]
impl PyAgent {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, config_text) = sac::load_checkpoint(&path).map_err(to_py)?;
        Ok(PyAgent { inner, config_text })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        sac::save_checkpoint(&path, &self.inner, &self.config_text).map_err(to_py)
    }

    /// Policy action; `deterministic=True` returns the squashed mean.
    #[pyo3(signature = (obs, deterministic = true))]
    fn act(&mut self, obs: Vec<f64>, deterministic: bool) -> PyResult<Vec<f64>> {
        self.inner.act(&obs, deterministic).map_err(to_py)
    }

    /// Evaluate on the environment recorded in the checkpoint config.
    fn evaluate<'py>(
        &mut self,
        py: Python<'py>,
        episodes: usize,
        seed: u64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let cfg = ExperimentConfig::parse(&self.config_text).map_err(to_py)?;
        let summary =
            runner::evaluate_agent(&mut self.inner, &cfg, episodes, seed).map_err(to_py)?;
        summary_dict(py, &summary)
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        self.inner.obs_dim
    }

    #[getter]
    fn act_dim(&self) -> usize {
        self.inner.act_dim
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn config_text(&self) -> String {
        self.config_text.clone()
    }
}

fn metrics_dict<'py>(py: Python<'py>, m: &EpochMetrics) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("epoch", m.epoch)?;
    d.set_item("mean_reward", m.mean_reward)?;
    d.set_item("q1_loss", m.q1_loss)?;
    d.set_item("q2_loss", m.q2_loss)?;
    d.set_item("policy_loss", m.policy_loss)?;
    d.set_item("alpha", m.alpha)?;
    d.set_item("mean_abs_position", m.mean_abs_position)?;
    d.set_item("episodes", m.episodes)?;
    Ok(d)
}

fn summary_dict<'py>(py: Python<'py>, s: &EvalSummary) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("episodes", s.episodes)?;
    d.set_item("mean_reward", s.mean_reward)?;
    d.set_item("stdev_reward", s.stdev_reward)?;
    d.set_item("mean_net_pnl", s.mean_net_pnl)?;
    d.set_item("mean_sharpe", s.mean_sharpe)?;
    d.set_item("mean_abs_position", s.mean_abs_position)?;
    Ok(d)
}

fn report_dict<'py>(py: Python<'py>, r: &ComparisonReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let rows = r
        .rows
        .iter()
        .map(|row| {
            let rd = PyDict::new(py);
            rd.set_item("seed", row.seed)?;
            rd.set_item("sharpe_a", row.sharpe_a)?;
            rd.set_item("sharpe_b", row.sharpe_b)?;
            rd.set_item("reward_a", row.reward_a)?;
            rd.set_item("reward_b", row.reward_b)?;
            Ok(rd)
        })
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("rows", PyList::new(py, rows)?)?;
    d.set_item("sharpe_wins_a", r.sharpe_wins_a)?;
    d.set_item("sharpe_wins_b", r.sharpe_wins_b)?;
    d.set_item("reward_wins_a", r.reward_wins_a)?;
    d.set_item("reward_wins_b", r.reward_wins_b)?;
    Ok(d)
}

/// Train in memory; returns the agent and the per-epoch metrics rows.
#[pyfunction]
fn train<'py>(py: Python<'py>, cfg: &PyConfig) -> PyResult<(PyAgent, Bound<'py, PyList>)> {
    if !cfg.inner.mode.is_trained() {
        return Err(PyValueError::new_err(format!(
            "mode '{}' is an untrained baseline",
            cfg.inner.mode
        )));
    }
    let config_text = cfg.inner.to_config_string();
    let (agent, metrics) = if cfg.inner.mode.is_portfolio() {
        let mut env = PortfolioEnv::new(&cfg.inner.build_portfolio().map_err(to_py)?).map_err(to_py)?;
        sac::train(&mut env, &cfg.inner.hyper, cfg.inner.seed, |_| Ok(())).map_err(to_py)?
    } else {
        let mut env = HedgeEnv::new(&cfg.inner.build_env().map_err(to_py)?).map_err(to_py)?;
        sac::train(&mut env, &cfg.inner.hyper, cfg.inner.seed, |_| Ok(())).map_err(to_py)?
    };
    let rows =
        metrics.iter().map(|m| metrics_dict(py, m)).collect::<PyResult<Vec<_>>>()?;
    Ok((PyAgent { inner: agent, config_text }, PyList::new(py, rows)?))
}

/// Full training run with artifacts; returns the run directory path.
#[pyfunction]
fn run_training(cfg: &PyConfig) -> PyResult<PathBuf> {
    Ok(runner::run_training(&cfg.inner).map_err(to_py)?.dir)
}

/// Evaluate a checkpoint file over fresh deterministic episodes.
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    checkpoint: PathBuf,
    episodes: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    summary_dict(py, &runner::evaluate(&checkpoint, episodes, seed).map_err(to_py)?)
}

/// Run two checkpoints on shared-seed market data.
#[pyfunction]
fn compare<'py>(
    py: Python<'py>,
    checkpoint_a: PathBuf,
    checkpoint_b: PathBuf,
    n_seeds: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    report_dict(py, &runner::compare(&checkpoint_a, &checkpoint_b, n_seeds, seed).map_err(to_py)?)
}

/// Render `dashboard.svg` from a run directory; returns its path.
#[pyfunction]
fn export_run(run_dir: PathBuf) -> PyResult<PathBuf> {
    runner::export_run(Path::new(&run_dir)).map_err(to_py)
}

/// Mean step return over its sample standard deviation; `None` when the
/// series has zero dispersion.
#[pyfunction]
fn sharpe_ratio(pnl: Vec<f64>) -> PyResult<Option<f64>> {
    metrics::sharpe_ratio(&pnl).map_err(to_py)
}

#[pymodule]
fn hedgelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyHedgeEnv>()?;
    m.add_class::<PyPortfolioEnv>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run_training, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(export_run, m)?)?;
    m.add_function(wrap_pyfunction!(sharpe_ratio, m)?)?;
    Ok(())
}
