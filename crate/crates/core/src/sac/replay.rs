//! Uniform-sampling ring replay buffer.

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub act: Vec<f64>,
    pub reward: f64,
    pub next_obs: Vec<f64>,
    /// 1.0 only on true terminations; horizon timeouts bootstrap (0.0).
    pub done: f64,
}

#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    data: Vec<Transition>,
    cursor: usize,
}

/// Column-stacked minibatch for vectorized updates.
pub struct Batch {
    pub obs: Array2<f64>,
    pub act: Array2<f64>,
    pub reward: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub done: Array1<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Param("replay capacity must be > 0".into()));
        }
        Ok(ReplayBuffer { capacity, data: Vec::new(), cursor: 0 })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Overwrites the oldest transition once full.
    pub fn push(&mut self, t: Transition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
        } else {
            self.data[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform sample with replacement over stored transitions.
    pub fn sample(&self, batch_size: usize, rng: &mut ChaCha8Rng) -> Result<Batch> {
        if self.data.is_empty() {
            return Err(Error::State("cannot sample from an empty replay buffer".into()));
        }
        let obs_dim = self.data[0].obs.len();
        let act_dim = self.data[0].act.len();
        let mut obs = Array2::zeros((batch_size, obs_dim));
        let mut act = Array2::zeros((batch_size, act_dim));
        let mut reward = Array1::zeros(batch_size);
        let mut next_obs = Array2::zeros((batch_size, obs_dim));
        let mut done = Array1::zeros(batch_size);
        for i in 0..batch_size {
            let t = &self.data[rng.random_range(0..self.data.len())];
            for (j, v) in t.obs.iter().enumerate() {
                obs[[i, j]] = *v;
            }
            for (j, v) in t.act.iter().enumerate() {
                act[[i, j]] = *v;
            }
            reward[i] = t.reward;
            for (j, v) in t.next_obs.iter().enumerate() {
                next_obs[[i, j]] = *v;
            }
            done[i] = t.done;
        }
        Ok(Batch { obs, act, reward, next_obs, done })
    }
}
