//! Experiment orchestration: training runs with their artifact directories,
//! checkpoint evaluation, and shared-seed side-by-side comparison.
//!
//! A training run directory contains exactly `config.txt`, `checkpoint.bin`,
//! `metrics.jsonl`, and `episode.csv` (the final deterministic episode). The
//! untrained baseline modes (`dummy`, `random`) produce no checkpoint; their
//! `metrics.jsonl` carries one row per evaluation episode. `dashboard.svg`
//! and `comparison.csv` are written by the export and compare entry points.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentMode};
use crate::env::{Environment, HedgeEnv, Mode, PortfolioEnv};
use crate::error::{Error, Result};
use crate::export;
use crate::flow::FlowConfig;
use crate::metrics::sharpe_ratio;
use crate::rng::{stream, stream_rng};
use crate::sac::{load_checkpoint, save_checkpoint, train, EpochMetrics, SacAgent};

pub const CONFIG_FILE: &str = "config.txt";
pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const EPISODE_FILE: &str = "episode.csv";
pub const DASHBOARD_FILE: &str = "dashboard.svg";
pub const COMPARISON_FILE: &str = "comparison.csv";

/// Paths produced by [`run_training`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    /// `None` for the untrained baseline modes.
    pub checkpoint: Option<PathBuf>,
}

/// Per-episode rollout statistics.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeStats {
    pub reward: f64,
    pub net_pnl: f64,
    /// `None` when the episode is too short or has zero PNL dispersion.
    pub sharpe: Option<f64>,
    pub mean_abs_position: f64,
}

/// Action source for a frozen rollout.
pub enum Policy<'a> {
    /// Deterministic (mean) actions from a trained agent.
    Trained(&'a mut SacAgent),
    /// Myopic flatten-the-position baseline.
    Heuristic,
    /// Uniform draws over the action bounds.
    Random(&'a mut ChaCha8Rng),
}

fn episode_sharpe(pnl: &[f64]) -> Result<Option<f64>> {
    if pnl.len() < 3 {
        return Ok(None);
    }
    sharpe_ratio(pnl)
}

/// One frozen episode on the single-asset environment.
pub fn rollout_single(env: &mut HedgeEnv, ep_seed: u64, policy: &mut Policy) -> Result<EpisodeStats> {
    let mut obs = env.reset(ep_seed)?;
    let mut reward = 0.0;
    let mut abs_sum = 0.0;
    let mut steps = 0usize;
    loop {
        let action = match policy {
            Policy::Trained(agent) => agent.act(&obs, true)?,
            Policy::Heuristic => {
                let a = env.heuristic();
                let mut v = vec![a.hedge_size];
                if env.cfg().mode.has_skew() {
                    v.push(a.skew);
                }
                v
            }
            Policy::Random(rng) => {
                env.bounds().iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
            }
        };
        let out = env.step(&action)?;
        reward += out.reward;
        abs_sum += out.abs_position;
        steps += 1;
        if out.done {
            break;
        }
        obs = out.obs;
    }
    let pnl: Vec<f64> = env.records().iter().map(|r| r.net_pnl).collect();
    Ok(EpisodeStats {
        reward,
        net_pnl: pnl.last().copied().unwrap_or(0.0),
        sharpe: episode_sharpe(&pnl)?,
        mean_abs_position: abs_sum / steps.max(1) as f64,
    })
}

/// One frozen episode on the portfolio environment.
pub fn rollout_portfolio(
    env: &mut PortfolioEnv,
    ep_seed: u64,
    policy: &mut Policy,
) -> Result<EpisodeStats> {
    let mut obs = env.reset(ep_seed)?;
    let mut reward = 0.0;
    let mut abs_sum = 0.0;
    let mut steps = 0usize;
    loop {
        let action = match policy {
            Policy::Trained(agent) => agent.act(&obs, true)?,
            Policy::Heuristic => {
                return Err(Error::Param(
                    "heuristic policy is defined for the single-asset environment only".into(),
                ))
            }
            Policy::Random(rng) => {
                env.bounds().iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
            }
        };
        let out = env.step(&action)?;
        reward += out.reward;
        abs_sum += out.abs_position;
        steps += 1;
        if out.done {
            break;
        }
        obs = out.obs;
    }
    let pnl: Vec<f64> = env.records().iter().map(|r| r.base.net_pnl).collect();
    Ok(EpisodeStats {
        reward,
        net_pnl: pnl.last().copied().unwrap_or(0.0),
        sharpe: episode_sharpe(&pnl)?,
        mean_abs_position: abs_sum / steps.max(1) as f64,
    })
}

/// Seed of the final deterministic episode written to `episode.csv`; equals
/// the first episode of an evaluation run with the same seed.
fn final_episode_seed(seed: u64) -> u64 {
    stream_rng(seed, stream::EVAL).random::<u64>()
}

/// Train (or, for the baseline modes, evaluate) per the config and populate
/// the run directory. Config errors surface before any compute; on
/// divergence the metrics rows flushed so far are retained.
pub fn run_training(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    cfg.validate()?;
    let dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&dir)?;
    let config_text = cfg.to_config_string();
    std::fs::write(dir.join(CONFIG_FILE), &config_text)?;
    let mut metrics_w = BufWriter::new(File::create(dir.join(METRICS_FILE))?);

    if !cfg.mode.is_trained() {
        let env_cfg = cfg.build_env()?;
        let mut env = HedgeEnv::new(&env_cfg)?;
        let episodes = cfg.eval_episodes.max(1);
        let mut ep_rng = stream_rng(cfg.seed, stream::EVAL);
        let mut action_rng = stream_rng(cfg.seed, stream::ACTION);
        for ep in 0..episodes {
            let ep_seed = ep_rng.random::<u64>();
            let stats = match cfg.mode {
                ExperimentMode::Dummy => rollout_single(&mut env, ep_seed, &mut Policy::Heuristic)?,
                _ => rollout_single(&mut env, ep_seed, &mut Policy::Random(&mut action_rng))?,
            };
            let row = EpochMetrics {
                epoch: ep,
                mean_reward: Some(stats.reward),
                q1_loss: None,
                q2_loss: None,
                policy_loss: None,
                alpha: cfg.hyper.alpha,
                mean_abs_position: stats.mean_abs_position,
                episodes: 1,
            };
            export::append_metrics_line(&mut metrics_w, &row)?;
        }
        metrics_w.flush()?;
        export::write_episode_csv(&dir.join(EPISODE_FILE), env.records(), env_cfg.mode)?;
        return Ok(RunArtifacts { dir, checkpoint: None });
    }

    let sink = |w: &mut BufWriter<File>, m: &EpochMetrics| -> Result<()> {
        export::append_metrics_line(w, m)?;
        w.flush()?;
        Ok(())
    };
    let checkpoint = dir.join(CHECKPOINT_FILE);
    if cfg.mode.is_portfolio() {
        let mut env = PortfolioEnv::new(&cfg.build_portfolio()?)?;
        let (mut agent, _) =
            train(&mut env, &cfg.hyper, cfg.seed, |m| sink(&mut metrics_w, m))?;
        save_checkpoint(&checkpoint, &agent, &config_text)?;
        rollout_portfolio(&mut env, final_episode_seed(cfg.seed), &mut Policy::Trained(&mut agent))?;
        export::write_portfolio_csv(&dir.join(EPISODE_FILE), env.records())?;
    } else {
        let env_cfg = cfg.build_env()?;
        let mut env = HedgeEnv::new(&env_cfg)?;
        let (mut agent, _) =
            train(&mut env, &cfg.hyper, cfg.seed, |m| sink(&mut metrics_w, m))?;
        save_checkpoint(&checkpoint, &agent, &config_text)?;
        rollout_single(&mut env, final_episode_seed(cfg.seed), &mut Policy::Trained(&mut agent))?;
        export::write_episode_csv(&dir.join(EPISODE_FILE), env.records(), env_cfg.mode)?;
    }
    Ok(RunArtifacts { dir, checkpoint: Some(checkpoint) })
}

/// Aggregate evaluation statistics; all-`None` when no episodes were run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_reward: Option<f64>,
    pub stdev_reward: Option<f64>,
    pub mean_net_pnl: Option<f64>,
    pub mean_sharpe: Option<f64>,
    pub mean_abs_position: Option<f64>,
}

fn summarize(stats: &[EpisodeStats]) -> EvalSummary {
    if stats.is_empty() {
        return EvalSummary {
            episodes: 0,
            mean_reward: None,
            stdev_reward: None,
            mean_net_pnl: None,
            mean_sharpe: None,
            mean_abs_position: None,
        };
    }
    let n = stats.len() as f64;
    let mean_reward = stats.iter().map(|s| s.reward).sum::<f64>() / n;
    let stdev_reward = (stats.len() >= 2).then(|| {
        (stats.iter().map(|s| (s.reward - mean_reward).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    });
    let sharpes: Vec<f64> = stats.iter().filter_map(|s| s.sharpe).collect();
    EvalSummary {
        episodes: stats.len(),
        mean_reward: Some(mean_reward),
        stdev_reward,
        mean_net_pnl: Some(stats.iter().map(|s| s.net_pnl).sum::<f64>() / n),
        mean_sharpe: (!sharpes.is_empty())
            .then(|| sharpes.iter().sum::<f64>() / sharpes.len() as f64),
        mean_abs_position: Some(stats.iter().map(|s| s.mean_abs_position).sum::<f64>() / n),
    }
}

fn check_dims(agent: &SacAgent, obs_dim: usize, act_dim: usize) -> Result<()> {
    if agent.obs_dim != obs_dim || agent.act_dim != act_dim {
        return Err(Error::Param(format!(
            "checkpoint/environment dimension mismatch: agent ({}, {}) vs environment ({}, {})",
            agent.obs_dim, agent.act_dim, obs_dim, act_dim
        )));
    }
    Ok(())
}

/// Evaluate a loaded agent on the environment its config describes.
pub fn evaluate_agent(
    agent: &mut SacAgent,
    cfg: &ExperimentConfig,
    n_episodes: usize,
    seed: u64,
) -> Result<EvalSummary> {
    let mut ep_rng = stream_rng(seed, stream::EVAL);
    let mut stats = Vec::with_capacity(n_episodes);
    if cfg.mode.is_portfolio() {
        let mut env = PortfolioEnv::new(&cfg.build_portfolio()?)?;
        check_dims(agent, env.obs_dim(), env.act_dim())?;
        for _ in 0..n_episodes {
            let ep_seed = ep_rng.random::<u64>();
            stats.push(rollout_portfolio(&mut env, ep_seed, &mut Policy::Trained(agent))?);
        }
    } else {
        let mut env = HedgeEnv::new(&cfg.build_env()?)?;
        check_dims(agent, env.obs_dim(), env.act_dim())?;
        for _ in 0..n_episodes {
            let ep_seed = ep_rng.random::<u64>();
            stats.push(rollout_single(&mut env, ep_seed, &mut Policy::Trained(agent))?);
        }
    }
    Ok(summarize(&stats))
}

/// Evaluate a checkpoint over fresh deterministic episodes.
pub fn evaluate(checkpoint: &Path, n_episodes: usize, seed: u64) -> Result<EvalSummary> {
    let (mut agent, config_text) = load_checkpoint(checkpoint)?;
    let cfg = ExperimentConfig::parse(&config_text)?;
    evaluate_agent(&mut agent, &cfg, n_episodes, seed)
}

/// One comparison seed: both agents on bit-identical market data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub seed: u64,
    pub sharpe_a: Option<f64>,
    pub sharpe_b: Option<f64>,
    pub reward_a: f64,
    pub reward_b: f64,
}

/// Side-by-side report; wins count strict inequalities (Sharpe wins require
/// both sides defined).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub sharpe_wins_a: usize,
    pub sharpe_wins_b: usize,
    pub reward_wins_a: usize,
    pub reward_wins_b: usize,
}

/// Skew is applied at step time from its own stream; it never alters the
/// generated market/flow arrays, so it is ignored when deciding whether two
/// configs observe the same data.
fn generation_flow(cfg: &FlowConfig) -> FlowConfig {
    FlowConfig { beta_skew: 0.0, ..cfg.clone() }
}

fn check_comparable(a: &ExperimentConfig, b: &ExperimentConfig) -> Result<()> {
    let modes = (a.mode.is_portfolio(), b.mode.is_portfolio());
    if modes.0 != modes.1 {
        return Err(Error::Param(
            "cannot compare a portfolio checkpoint against a single-asset one".into(),
        ));
    }
    if modes.0 {
        if a.portfolio != b.portfolio {
            return Err(Error::Param("comparison requires identical portfolio configs".into()));
        }
        return Ok(());
    }
    let (ea, eb) = (a.build_env()?, b.build_env()?);
    let compatible = ea.mode == eb.mode
        || matches!((ea.mode, eb.mode), (Mode::Single, Mode::Skew) | (Mode::Skew, Mode::Single));
    if !compatible {
        return Err(Error::Param(format!(
            "incompatible environment modes for comparison: {:?} vs {:?}",
            ea.mode, eb.mode
        )));
    }
    if ea.market != eb.market || generation_flow(&ea.flow) != generation_flow(&eb.flow) {
        return Err(Error::Param(
            "comparison requires identical market and flow generation configs".into(),
        ));
    }
    Ok(())
}

/// Run both frozen agents over `n_seeds` shared realizations. Across
/// single vs skew modes the non-skew agent simply has no skew action (its
/// quotes stay unskewed), which equals a zero-padded skew.
pub fn compare_agents(
    agent_a: &mut SacAgent,
    cfg_a: &ExperimentConfig,
    agent_b: &mut SacAgent,
    cfg_b: &ExperimentConfig,
    n_seeds: usize,
    base_seed: u64,
) -> Result<ComparisonReport> {
    check_comparable(cfg_a, cfg_b)?;
    let mut seed_rng = stream_rng(base_seed, stream::COMPARE);
    let mut rows = Vec::with_capacity(n_seeds);
    if cfg_a.mode.is_portfolio() {
        let mut env_a = PortfolioEnv::new(&cfg_a.build_portfolio()?)?;
        let mut env_b = PortfolioEnv::new(&cfg_b.build_portfolio()?)?;
        check_dims(agent_a, env_a.obs_dim(), env_a.act_dim())?;
        check_dims(agent_b, env_b.obs_dim(), env_b.act_dim())?;
        for _ in 0..n_seeds {
            let seed = seed_rng.random::<u64>();
            let sa = rollout_portfolio(&mut env_a, seed, &mut Policy::Trained(agent_a))?;
            let sb = rollout_portfolio(&mut env_b, seed, &mut Policy::Trained(agent_b))?;
            rows.push(ComparisonRow {
                seed,
                sharpe_a: sa.sharpe,
                sharpe_b: sb.sharpe,
                reward_a: sa.reward,
                reward_b: sb.reward,
            });
        }
    } else {
        let mut env_a = HedgeEnv::new(&cfg_a.build_env()?)?;
        let mut env_b = HedgeEnv::new(&cfg_b.build_env()?)?;
        check_dims(agent_a, env_a.obs_dim(), env_a.act_dim())?;
        check_dims(agent_b, env_b.obs_dim(), env_b.act_dim())?;
        for _ in 0..n_seeds {
            let seed = seed_rng.random::<u64>();
            let sa = rollout_single(&mut env_a, seed, &mut Policy::Trained(agent_a))?;
            let sb = rollout_single(&mut env_b, seed, &mut Policy::Trained(agent_b))?;
            if env_a.market() != env_b.market() {
                return Err(Error::Data("shared-seed market data diverged".into()));
            }
            rows.push(ComparisonRow {
                seed,
                sharpe_a: sa.sharpe,
                sharpe_b: sb.sharpe,
                reward_a: sa.reward,
                reward_b: sb.reward,
            });
        }
    }
    let wins = |f: &dyn Fn(&ComparisonRow) -> Option<(f64, f64)>, flip: bool| {
        rows.iter()
            .filter_map(|r| f(r))
            .filter(|&(x, y)| if flip { y > x } else { x > y })
            .count()
    };
    let sharpe_pair = |r: &ComparisonRow| Some((r.sharpe_a?, r.sharpe_b?));
    let reward_pair = |r: &ComparisonRow| Some((r.reward_a, r.reward_b));
    Ok(ComparisonReport {
        sharpe_wins_a: wins(&sharpe_pair, false),
        sharpe_wins_b: wins(&sharpe_pair, true),
        reward_wins_a: wins(&reward_pair, false),
        reward_wins_b: wins(&reward_pair, true),
        rows,
    })
}

/// Compare two checkpoints on shared-seed market data.
pub fn compare(
    checkpoint_a: &Path,
    checkpoint_b: &Path,
    n_seeds: usize,
    base_seed: u64,
) -> Result<ComparisonReport> {
    let (mut agent_a, text_a) = load_checkpoint(checkpoint_a)?;
    let (mut agent_b, text_b) = load_checkpoint(checkpoint_b)?;
    let cfg_a = ExperimentConfig::parse(&text_a)?;
    let cfg_b = ExperimentConfig::parse(&text_b)?;
    compare_agents(&mut agent_a, &cfg_a, &mut agent_b, &cfg_b, n_seeds, base_seed)
}

/// `seed,sharpe_a,sharpe_b,reward_a,reward_b`; undefined Sharpe → empty cell.
pub fn write_comparison_csv(path: &Path, report: &ComparisonReport) -> Result<()> {
    let mut text = String::from("seed,sharpe_a,sharpe_b,reward_a,reward_b\n");
    for r in &report.rows {
        let cell = |o: Option<f64>| o.map(|v| format!("{v:?}")).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{:?},{:?}\n",
            r.seed,
            cell(r.sharpe_a),
            cell(r.sharpe_b),
            r.reward_a,
            r.reward_b
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Render `dashboard.svg` from a run directory's `episode.csv`.
pub fn export_run(dir: &Path) -> Result<PathBuf> {
    let episode = dir.join(EPISODE_FILE);
    let out = dir.join(DASHBOARD_FILE);
    let text = std::fs::read_to_string(&episode)?;
    let header = text.lines().next().unwrap_or_default();
    if header.ends_with("overhedge") {
        export::export_portfolio_dashboard(&out, &export::read_portfolio_csv(&episode)?)?;
    } else {
        export::export_dashboard(&out, &export::read_episode_csv(&episode)?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sac::SacHyper;
    use std::collections::BTreeSet;

    fn tiny_cfg(mode: ExperimentMode, dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::preset(mode);
        cfg.seed = 7;
        cfg.eval_episodes = 3;
        cfg.out_dir = dir.to_path_buf();
        cfg.hyper = SacHyper {
            hidden: vec![16, 16],
            batch_size: 32,
            replay_capacity: 2048,
            warmup_steps: 64,
            epochs: 2,
            steps_per_epoch: 64,
            reward_scale: cfg.hyper.reward_scale,
            ..SacHyper::default()
        };
        cfg
    }

    fn dir_entries(dir: &Path) -> BTreeSet<String> {
        std::fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect()
    }

    #[test]
    fn training_run_writes_exact_manifest() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentMode::Single, &tmp.path().join("run"));
        let artifacts = run_training(&cfg).unwrap();
        assert_eq!(
            dir_entries(&artifacts.dir),
            BTreeSet::from_iter(
                ["config.txt", "checkpoint.bin", "metrics.jsonl", "episode.csv"]
                    .map(String::from)
            )
        );
        let metrics = export::read_metrics_jsonl(&artifacts.dir.join(METRICS_FILE)).unwrap();
        assert_eq!(metrics.len(), cfg.hyper.epochs);
        let episode = export::read_episode_csv(&artifacts.dir.join(EPISODE_FILE)).unwrap();
        assert!(!episode.is_empty());
        assert!(episode.last().unwrap().done);
        // snapshot parses back to the same config
        let snap = ExperimentConfig::load(&artifacts.dir.join(CONFIG_FILE)).unwrap();
        assert_eq!(snap, cfg);
    }

    #[test]
    fn rerun_reproduces_metrics_byte_identically() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg_a = tiny_cfg(ExperimentMode::Skew, &tmp.path().join("a"));
        let cfg_b = ExperimentConfig { out_dir: tmp.path().join("b"), ..cfg_a.clone() };
        run_training(&cfg_a).unwrap();
        run_training(&cfg_b).unwrap();
        let bytes_a = std::fs::read(cfg_a.out_dir.join(METRICS_FILE)).unwrap();
        let bytes_b = std::fs::read(cfg_b.out_dir.join(METRICS_FILE)).unwrap();
        assert!(!bytes_a.is_empty());
        assert_eq!(bytes_a, bytes_b);
        assert_eq!(
            std::fs::read(cfg_a.out_dir.join(EPISODE_FILE)).unwrap(),
            std::fs::read(cfg_b.out_dir.join(EPISODE_FILE)).unwrap()
        );
    }

    #[test]
    fn dummy_run_skips_training_and_checkpoint() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentMode::Dummy, &tmp.path().join("run"));
        let artifacts = run_training(&cfg).unwrap();
        assert!(artifacts.checkpoint.is_none());
        assert_eq!(
            dir_entries(&artifacts.dir),
            BTreeSet::from_iter(["config.txt", "metrics.jsonl", "episode.csv"].map(String::from))
        );
        let metrics = export::read_metrics_jsonl(&artifacts.dir.join(METRICS_FILE)).unwrap();
        assert_eq!(metrics.len(), cfg.eval_episodes);
        assert!(metrics.iter().all(|m| m.q1_loss.is_none() && m.mean_reward.is_some()));
    }

    #[test]
    fn evaluate_is_deterministic_and_handles_zero_episodes() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentMode::Single, &tmp.path().join("run"));
        let artifacts = run_training(&cfg).unwrap();
        let ckpt = artifacts.checkpoint.unwrap();
        let empty = evaluate(&ckpt, 0, 11).unwrap();
        assert_eq!(empty.episodes, 0);
        assert_eq!(empty.mean_reward, None);
        let a = evaluate(&ckpt, 3, 11).unwrap();
        let b = evaluate(&ckpt, 3, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.episodes, 3);
        assert!(a.mean_reward.is_some() && a.mean_sharpe.is_some());
    }

    #[test]
    fn evaluate_rejects_dimension_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentMode::Single, &tmp.path().join("run"));
        let artifacts = run_training(&cfg).unwrap();
        let (mut agent, _) = load_checkpoint(&artifacts.checkpoint.unwrap()).unwrap();
        let skew_cfg = tiny_cfg(ExperimentMode::Skew, &tmp.path().join("other"));
        let err = evaluate_agent(&mut agent, &skew_cfg, 1, 0).unwrap_err();
        assert!(matches!(err, Error::Param(_)), "got {err}");
    }

    #[test]
    fn compare_self_is_symmetric() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentMode::Single, &tmp.path().join("run"));
        let ckpt = run_training(&cfg).unwrap().checkpoint.unwrap();
        let report = compare(&ckpt, &ckpt, 3, 5).unwrap();
        assert_eq!(report.rows.len(), 3);
        for r in &report.rows {
            assert_eq!(r.sharpe_a, r.sharpe_b);
            assert_eq!(r.reward_a, r.reward_b);
        }
        assert_eq!(report.reward_wins_a + report.reward_wins_b, 0);
        let path = tmp.path().join(COMPARISON_FILE);
        write_comparison_csv(&path, &report).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "seed,sharpe_a,sharpe_b,reward_a,reward_b");
        assert_eq!(text.lines().count(), 4);
    }

    #[test]
    fn compare_spans_single_and_skew_modes() {
        let tmp = tempfile::tempdir().unwrap();
        let single = tiny_cfg(ExperimentMode::Single, &tmp.path().join("single"));
        let mut skew = tiny_cfg(ExperimentMode::Skew, &tmp.path().join("skew"));
        // share one generation config so the data really is identical
        skew.env.market = single.env.market.clone();
        skew.env.flow = FlowConfig { beta_skew: skew.env.flow.beta_skew, ..single.env.flow.clone() };
        let ckpt_a = run_training(&single).unwrap().checkpoint.unwrap();
        let ckpt_b = run_training(&skew).unwrap().checkpoint.unwrap();
        let report = compare(&ckpt_a, &ckpt_b, 2, 9).unwrap();
        assert_eq!(report.rows.len(), 2);
    }

    #[test]
    fn compare_rejects_portfolio_against_single() {
        let tmp = tempfile::tempdir().unwrap();
        let single = tiny_cfg(ExperimentMode::Single, &tmp.path().join("s"));
        let portfolio = tiny_cfg(ExperimentMode::Portfolio, &tmp.path().join("p"));
        let err = check_comparable(&portfolio, &single).unwrap_err();
        assert!(matches!(err, Error::Param(_)));
    }

    #[test]
    fn export_run_renders_dashboard_for_both_schemas() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny_cfg(ExperimentMode::Dummy, &tmp.path().join("run"));
        let artifacts = run_training(&cfg).unwrap();
        let svg = export_run(&artifacts.dir).unwrap();
        assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg "));

        let pcfg = tiny_cfg(ExperimentMode::Portfolio, &tmp.path().join("prun"));
        let partifacts = run_training(&pcfg).unwrap();
        let psvg = export_run(&partifacts.dir).unwrap();
        let ptext = std::fs::read_to_string(&psvg).unwrap();
        assert!(ptext.contains("blended_mid"));
    }
}
