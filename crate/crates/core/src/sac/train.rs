//! Training loop: warmup random actions, replay-fed updates, per-epoch
//! metrics, and a divergence guard.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

use super::{ReplayBuffer, SacAgent, SacHyper, Transition};

/// One metrics row, appended to `metrics.jsonl` per epoch. Losses are null
/// until the warmup phase ends; `mean_reward` is null if no episode finished
/// inside the epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub mean_reward: Option<f64>,
    pub q1_loss: Option<f64>,
    pub q2_loss: Option<f64>,
    pub policy_loss: Option<f64>,
    pub alpha: f64,
    pub mean_abs_position: f64,
    /// Episodes completed within this epoch.
    pub episodes: usize,
}

/// Train an agent on `env` for `hyper.epochs × hyper.steps_per_epoch` steps.
/// `sink` receives each epoch's metrics as soon as the epoch closes, so
/// partial records survive a later divergence abort.
///
/// Rewards are scaled by `hyper.reward_scale` inside the replay buffer;
/// metrics report unscaled environment rewards. Episodes cut off at the
/// horizon store `done = 0` (the value bootstraps), true breaches store 1.
pub fn train<E, F>(env: &mut E, hyper: &SacHyper, seed: u64, mut sink: F) -> Result<(SacAgent, Vec<EpochMetrics>)>
where
    E: Environment,
    F: FnMut(&EpochMetrics) -> Result<()>,
{
    hyper.validate()?;
    let mut agent = SacAgent::new(env.obs_dim(), env.act_dim(), &env.bounds(), hyper, seed)?;
    let mut replay = ReplayBuffer::new(hyper.replay_capacity)?;
    let mut ep_rng = stream_rng(seed, stream::EPISODE);

    let mut obs = env.reset(ep_rng.random::<u64>())?;
    let mut metrics = Vec::with_capacity(hyper.epochs);
    let mut episode_return = 0.0;
    let mut completed_returns: Vec<f64> = Vec::new();
    let mut abs_pos_sum = 0.0;
    let mut abs_pos_count = 0usize;
    let mut loss_acc = [0.0f64; 3];
    let mut loss_count = 0usize;

    let total_steps = hyper.epochs * hyper.steps_per_epoch;
    for step in 0..total_steps {
        let action = if step < hyper.warmup_steps {
            agent.random_action()
        } else {
            agent.act(&obs, false)?
        };
        let out = env.step(&action)?;
        replay.push(Transition {
            obs: obs.clone(),
            act: action,
            reward: out.reward * hyper.reward_scale,
            next_obs: out.obs.clone(),
            done: if out.done && !out.timeout { 1.0 } else { 0.0 },
        });
        episode_return += out.reward;
        abs_pos_sum += out.abs_position;
        abs_pos_count += 1;
        if out.done {
            completed_returns.push(episode_return);
            episode_return = 0.0;
            obs = env.reset(ep_rng.random::<u64>())?;
        } else {
            obs = out.obs;
        }

        if step >= hyper.warmup_steps && replay.len() >= hyper.batch_size {
            for _ in 0..hyper.updates_per_step {
                let batch = agent.sample_batch(&replay)?;
                let stats = agent.update(&batch).map_err(|e| match e {
                    Error::Train(msg) => {
                        Error::Train(format!("diverged at step {step}: {msg}"))
                    }
                    other => other,
                })?;
                loss_acc[0] += stats.q1_loss;
                loss_acc[1] += stats.q2_loss;
                loss_acc[2] += stats.policy_loss;
                loss_count += 1;
            }
        }

        if (step + 1) % hyper.steps_per_epoch == 0 {
            let epoch = (step + 1) / hyper.steps_per_epoch - 1;
            let mean_of = |acc: f64| {
                if loss_count > 0 {
                    Some(acc / loss_count as f64)
                } else {
                    None
                }
            };
            let row = EpochMetrics {
                epoch,
                mean_reward: if completed_returns.is_empty() {
                    None
                } else {
                    Some(completed_returns.iter().sum::<f64>() / completed_returns.len() as f64)
                },
                q1_loss: mean_of(loss_acc[0]),
                q2_loss: mean_of(loss_acc[1]),
                policy_loss: mean_of(loss_acc[2]),
                alpha: agent.alpha(),
                mean_abs_position: if abs_pos_count > 0 {
                    abs_pos_sum / abs_pos_count as f64
                } else {
                    0.0
                },
                episodes: completed_returns.len(),
            };
            sink(&row)?;
            metrics.push(row);
            completed_returns.clear();
            abs_pos_sum = 0.0;
            abs_pos_count = 0;
            loss_acc = [0.0; 3];
            loss_count = 0;
        }
    }
    Ok((agent, metrics))
}

/// Run `episodes` deterministic-policy episodes; returns per-episode total
/// rewards and the per-step mean |position| across all episodes.
pub fn evaluate_policy<E: Environment>(
    env: &mut E,
    agent: &mut SacAgent,
    episodes: usize,
    eval_seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let mut ep_rng = stream_rng(eval_seed, stream::EVAL);
    let mut returns = Vec::with_capacity(episodes);
    let mut abs_sum = 0.0;
    let mut abs_count = 0usize;
    for _ in 0..episodes {
        let mut obs = env.reset(ep_rng.random::<u64>())?;
        let mut total = 0.0;
        loop {
            let action = agent.act(&obs, true)?;
            let out = env.step(&action)?;
            total += out.reward;
            abs_sum += out.abs_position;
            abs_count += 1;
            if out.done {
                break;
            }
            obs = out.obs;
        }
        returns.push(total);
    }
    Ok((returns, if abs_count > 0 { abs_sum / abs_count as f64 } else { 0.0 }))
}
