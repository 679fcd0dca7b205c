//! Self-contained soft actor-critic.
//!
//! Twin Q-nets with polyak-averaged targets, a squashed-Gaussian policy,
//! uniform replay, and adaptive-moment descent — all double precision with
//! internal reverse-mode gradients.
//!
//! ```text
//! y  = r + γ(1−d)·(min_j Q_j^targ(s′, ã′) − α·log π(ã′|s′)),  ã′ ~ π(s′)
//! L_j = mean[(Q_j(s, a) − y)²]
//! policy ascends mean[min_j Q_j(s, ã) − α·log π(ã|s)]  (ã reparameterized)
//! targets ← (1−τ)·targets + τ·new  after every gradient step
//! ```

pub mod checkpoint;
mod net;
mod policy;
mod replay;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use net::{polyak_update, Adam, Mlp, MlpGrads, ScalarAdam};
pub use policy::{logp_of_action, squash_backward, squash_sample, ActionBounds, Squashed};
pub use replay::{Batch, ReplayBuffer, Transition};
pub use train::{evaluate_policy, train, EpochMetrics};

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, stream_rng};

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SacHyper {
    /// Discount γ.
    pub gamma: f64,
    /// Entropy temperature α (fixed value, or initial value when auto-tuned).
    pub alpha: f64,
    /// Auto-tune α toward `target_entropy`.
    pub auto_alpha: bool,
    /// Defaults to −action_dim when unset.
    pub target_entropy: Option<f64>,
    /// Polyak weight on NEW parameters.
    pub tau: f64,
    pub lr_policy: f64,
    pub lr_q: f64,
    pub lr_alpha: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Environment steps with uniform-random actions before updates begin.
    pub warmup_steps: usize,
    pub updates_per_step: usize,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub hidden: Vec<usize>,
    /// Rewards are multiplied by this inside the replay buffer only;
    /// reported episode rewards stay in environment units.
    pub reward_scale: f64,
}

impl Default for SacHyper {
    fn default() -> Self {
        SacHyper {
            gamma: 0.99,
            alpha: 0.2,
            auto_alpha: false,
            target_entropy: None,
            tau: 0.005,
            lr_policy: 3e-4,
            lr_q: 3e-4,
            lr_alpha: 3e-4,
            batch_size: 256,
            replay_capacity: 100_000,
            warmup_steps: 1000,
            updates_per_step: 1,
            epochs: 50,
            steps_per_epoch: 256,
            hidden: vec![256, 256],
            reward_scale: 1.0,
        }
    }
}

impl SacHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::Config(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.batch_size == 0 || self.batch_size > self.replay_capacity {
            return Err(Error::Config(format!(
                "batch size {} must be in 1..=replay capacity {}",
                self.batch_size, self.replay_capacity
            )));
        }
        if self.hidden.is_empty() || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::Config(format!("invalid hidden sizes {:?}", self.hidden)));
        }
        if self.epochs == 0 || self.steps_per_epoch == 0 {
            return Err(Error::Config("epochs and steps_per_epoch must be > 0".into()));
        }
        for (name, lr) in [("policy", self.lr_policy), ("q", self.lr_q), ("alpha", self.lr_alpha)] {
            if !(lr >= 0.0) || !lr.is_finite() {
                return Err(Error::Config(format!("{name} learning rate must be finite and >= 0")));
            }
        }
        if !(self.reward_scale > 0.0) {
            return Err(Error::Config("reward_scale must be > 0".into()));
        }
        Ok(())
    }
}

/// Losses and temperature after one update step.
#[derive(Debug, Clone, Copy)]
pub struct UpdateStats {
    pub q1_loss: f64,
    pub q2_loss: f64,
    pub policy_loss: f64,
    pub alpha: f64,
}

/// Policy, twin Q-nets with targets, optimizers, and draw streams.
pub struct SacAgent {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub bounds: ActionBounds,
    pub hyper: SacHyper,
    pub seed: u64,
    pub policy: Mlp,
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_targ: Mlp,
    pub q2_targ: Mlp,
    pub log_alpha: f64,
    opt_policy: Adam,
    opt_q1: Adam,
    opt_q2: Adam,
    opt_alpha: ScalarAdam,
    rng_action: ChaCha8Rng,
    rng_replay: ChaCha8Rng,
}

impl SacAgent {
    pub fn new(obs_dim: usize, act_dim: usize, bounds: &[(f64, f64)], hyper: &SacHyper, seed: u64) -> Result<Self> {
        hyper.validate()?;
        if bounds.len() != act_dim {
            return Err(Error::Param(format!(
                "{} action bounds for act_dim {act_dim}",
                bounds.len()
            )));
        }
        let bounds = ActionBounds::new(bounds)?;
        let mut policy_dims = vec![obs_dim];
        policy_dims.extend(&hyper.hidden);
        policy_dims.push(2 * act_dim);
        let mut q_dims = vec![obs_dim + act_dim];
        q_dims.extend(&hyper.hidden);
        q_dims.push(1);

        let mut init_rng = stream_rng(seed, stream::NET_INIT);
        let mut policy = Mlp::new(&policy_dims, &mut init_rng)?;
        // near-zero head: untrained deterministic action sits at the bounds
        // center, and initial log-stdev ≈ 0 keeps exploration moderate
        policy.scale_last_layer(0.01);
        let q1 = Mlp::new(&q_dims, &mut init_rng)?;
        let q2 = Mlp::new(&q_dims, &mut init_rng)?;
        let q1_targ = q1.clone();
        let q2_targ = q2.clone();

        Ok(SacAgent {
            obs_dim,
            act_dim,
            opt_policy: Adam::new(&policy, hyper.lr_policy),
            opt_q1: Adam::new(&q1, hyper.lr_q),
            opt_q2: Adam::new(&q2, hyper.lr_q),
            opt_alpha: ScalarAdam::new(hyper.lr_alpha),
            policy,
            q1,
            q2,
            q1_targ,
            q2_targ,
            log_alpha: hyper.alpha.max(1e-12).ln(),
            bounds,
            hyper: hyper.clone(),
            seed,
            rng_action: stream_rng(seed, stream::ACTION),
            rng_replay: stream_rng(seed, stream::REPLAY),
        })
    }

    /// Rebuild from checkpointed parameters; optimizer moments restart.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        obs_dim: usize,
        act_dim: usize,
        bounds: &[(f64, f64)],
        hyper: &SacHyper,
        seed: u64,
        log_alpha: f64,
        nets: [Mlp; 5],
    ) -> Result<Self> {
        let mut agent = SacAgent::new(obs_dim, act_dim, bounds, hyper, seed)?;
        let [policy, q1, q2, q1_targ, q2_targ] = nets;
        for (slot, net) in [
            (&mut agent.policy, policy),
            (&mut agent.q1, q1),
            (&mut agent.q2, q2),
            (&mut agent.q1_targ, q1_targ),
            (&mut agent.q2_targ, q2_targ),
        ] {
            if slot.dims() != net.dims() {
                return Err(Error::Data(format!(
                    "checkpoint net dims {:?} do not match agent dims {:?}",
                    net.dims(),
                    slot.dims()
                )));
            }
            *slot = net;
        }
        agent.log_alpha = log_alpha;
        Ok(agent)
    }

    pub fn alpha(&self) -> f64 {
        if self.hyper.auto_alpha {
            self.log_alpha.exp()
        } else {
            self.hyper.alpha
        }
    }

    pub fn target_entropy(&self) -> f64 {
        self.hyper.target_entropy.unwrap_or(-(self.act_dim as f64))
    }

    /// Uniform draw inside the bounds (warmup exploration).
    pub fn random_action(&mut self) -> Vec<f64> {
        self.bounds
            .lo
            .iter()
            .zip(&self.bounds.hi)
            .map(|(&lo, &hi)| self.rng_action.random_range(lo..hi))
            .collect()
    }

    /// Policy action for one observation; `deterministic` squashes the mean.
    pub fn act(&mut self, obs: &[f64], deterministic: bool) -> Result<Vec<f64>> {
        let out = self.policy.forward(obs)?;
        let row = Array2::from_shape_vec((1, out.len()), out).map_err(|e| Error::Param(e.to_string()))?;
        let rng = if deterministic { None } else { Some(&mut self.rng_action) };
        let sq = squash_sample(&row, &self.bounds, rng)?;
        Ok(sq.actions.row(0).to_vec())
    }

    fn q_input(obs: &Array2<f64>, act: &Array2<f64>) -> Array2<f64> {
        concatenate(Axis(1), &[obs.view(), act.view()]).expect("obs/act batch sizes match")
    }

    /// Bootstrap targets `y`; fresh policy draw at the next observation.
    pub fn q_target(&mut self, batch: &Batch) -> Result<Array1<f64>> {
        let pol_out = self.policy.forward_batch(&batch.next_obs)?;
        let sq = squash_sample(&pol_out, &self.bounds, Some(&mut self.rng_action))?;
        let q_in = Self::q_input(&batch.next_obs, &sq.actions);
        let t1 = self.q1_targ.forward_batch(&q_in)?;
        let t2 = self.q2_targ.forward_batch(&q_in)?;
        let alpha = self.alpha();
        let gamma = self.hyper.gamma;
        let n = batch.reward.len();
        let mut y = Array1::zeros(n);
        for i in 0..n {
            let min_q = t1[[i, 0]].min(t2[[i, 0]]);
            y[i] = batch.reward[i]
                + gamma * (1.0 - batch.done[i]) * (min_q - alpha * sq.logp[i]);
        }
        Ok(y)
    }

    /// Mean squared errors of both Q-nets against detached targets.
    pub fn q_loss(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let y = self.q_target(batch)?;
        let q_in = Self::q_input(&batch.obs, &batch.act);
        let q1 = self.q1.forward_batch(&q_in)?;
        let q2 = self.q2.forward_batch(&q_in)?;
        let n = y.len() as f64;
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        for i in 0..y.len() {
            l1 += (q1[[i, 0]] - y[i]).powi(2);
            l2 += (q2[[i, 0]] - y[i]).powi(2);
        }
        Ok((l1 / n, l2 / n))
    }

    /// One descent step on each Q-net; returns the losses.
    pub fn q_update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let y = self.q_target(batch)?;
        let q_in = Self::q_input(&batch.obs, &batch.act);
        let n = y.len() as f64;
        let mut losses = [0.0; 2];
        for (k, (net, opt)) in [
            (&mut self.q1, &mut self.opt_q1),
            (&mut self.q2, &mut self.opt_q2),
        ]
        .into_iter()
        .enumerate()
        {
            let (cache, out) = net.forward_cached(&q_in)?;
            let mut g = Array2::zeros(out.dim());
            let mut loss = 0.0;
            for i in 0..y.len() {
                let r = out[[i, 0]] - y[i];
                loss += r * r;
                g[[i, 0]] = 2.0 * r / n;
            }
            loss /= n;
            if !loss.is_finite() {
                return Err(Error::Train(format!("non-finite Q{} loss {loss}", k + 1)));
            }
            let (grads, _) = net.backward(&cache, &g);
            if !grads.is_finite() {
                return Err(Error::Train(format!("non-finite Q{} gradients", k + 1)));
            }
            opt.step(net, &grads);
            losses[k] = loss;
        }
        Ok((losses[0], losses[1]))
    }

    /// One ascent step on `mean(min_j Q_j(s, ã) − α·log π)`; Q parameters are
    /// held fixed. Returns (policy loss, mean log-probability).
    pub fn policy_update(&mut self, batch: &Batch) -> Result<(f64, f64)> {
        let (pol_cache, pol_out) = self.policy.forward_cached(&batch.obs)?;
        let sq = squash_sample(&pol_out, &self.bounds, Some(&mut self.rng_action))?;
        let q_in = Self::q_input(&batch.obs, &sq.actions);
        let (c1, o1) = self.q1.forward_cached(&q_in)?;
        let (c2, o2) = self.q2.forward_cached(&q_in)?;
        let alpha = self.alpha();
        let n = batch.obs.nrows();
        let nf = n as f64;
        let mut g1 = Array2::zeros(o1.dim());
        let mut g2 = Array2::zeros(o2.dim());
        let mut loss = 0.0;
        let mut logp_sum = 0.0;
        for i in 0..n {
            let (v1, v2) = (o1[[i, 0]], o2[[i, 0]]);
            loss += alpha * sq.logp[i] - v1.min(v2);
            logp_sum += sq.logp[i];
            // loss gradient −1/n flows through the selected Q-net only
            if v1 <= v2 {
                g1[[i, 0]] = -1.0 / nf;
            } else {
                g2[[i, 0]] = -1.0 / nf;
            }
        }
        loss /= nf;
        if !loss.is_finite() {
            return Err(Error::Train(format!("non-finite policy loss {loss}")));
        }
        let (_, gin1) = self.q1.backward(&c1, &g1);
        let (_, gin2) = self.q2.backward(&c2, &g2);
        let g_q_in = gin1 + gin2;
        let g_actions = g_q_in.slice(s![.., self.obs_dim..]).to_owned();
        let g_logp = Array1::from_elem(n, alpha / nf);
        let g_pol_out = squash_backward(&sq, &g_actions, &g_logp);
        let (grads, _) = self.policy.backward(&pol_cache, &g_pol_out);
        if !grads.is_finite() {
            return Err(Error::Train("non-finite policy gradients".into()));
        }
        self.opt_policy.step(&mut self.policy, &grads);
        Ok((loss, logp_sum / nf))
    }

    /// Temperature step toward the target entropy (no-op when fixed).
    pub fn alpha_update(&mut self, mean_logp: f64) {
        if !self.hyper.auto_alpha {
            return;
        }
        let grad = -(mean_logp + self.target_entropy());
        self.opt_alpha.step(&mut self.log_alpha, grad);
    }

    pub fn polyak_targets(&mut self) -> Result<()> {
        polyak_update(&mut self.q1_targ, &self.q1, self.hyper.tau)?;
        polyak_update(&mut self.q2_targ, &self.q2, self.hyper.tau)
    }

    /// Full SAC update: Q descent, policy ascent, temperature, polyak.
    pub fn update(&mut self, batch: &Batch) -> Result<UpdateStats> {
        let (q1_loss, q2_loss) = self.q_update(batch)?;
        let (policy_loss, mean_logp) = self.policy_update(batch)?;
        self.alpha_update(mean_logp);
        self.polyak_targets()?;
        Ok(UpdateStats { q1_loss, q2_loss, policy_loss, alpha: self.alpha() })
    }

    pub fn sample_batch(&mut self, replay: &ReplayBuffer) -> Result<Batch> {
        replay.sample(self.hyper.batch_size, &mut self.rng_replay)
    }
}
