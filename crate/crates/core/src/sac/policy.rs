//! Squashed-Gaussian policy head.
//!
//! The policy net emits `[mean | log_stdev]` per action dimension. An action
//! is `center + scale·tanh(mean + stdev·ε)` with `ε ~ N(0, 1)`, so emitted
//! actions always stay inside the bounds. The log-probability carries the
//! change-of-variables correction in the softplus form
//! `log(1 − tanh²z) = 2·(ln 2 − z − softplus(−2z))`, which is stable for
//! large |z| where the naive expression cancels catastrophically.

use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Per-dimension affine map from tanh output to the action interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionBounds {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    center: Vec<f64>,
    scale: Vec<f64>,
}

impl ActionBounds {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Param("action bounds must be non-empty".into()));
        }
        for &(lo, hi) in bounds {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Param(format!("invalid action bound ({lo}, {hi})")));
            }
        }
        Ok(ActionBounds {
            lo: bounds.iter().map(|b| b.0).collect(),
            hi: bounds.iter().map(|b| b.1).collect(),
            center: bounds.iter().map(|b| 0.5 * (b.0 + b.1)).collect(),
            scale: bounds.iter().map(|b| 0.5 * (b.1 - b.0)).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| (l, h)).collect()
    }
}

/// Sampled actions plus everything needed to backpropagate through the draw.
pub struct Squashed {
    pub actions: Array2<f64>,
    pub logp: Array1<f64>,
    tanh_z: Array2<f64>,
    eps: Array2<f64>,
    std: Array2<f64>,
    clamp_mask: Array2<f64>,
    scale: Vec<f64>,
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Reparameterized draw through `tanh`; `rng = None` is the deterministic
/// mode (ε = 0, action = squashed mean).
pub fn squash_sample(
    policy_out: &Array2<f64>,
    bounds: &ActionBounds,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<Squashed> {
    let a_dim = bounds.dim();
    if policy_out.ncols() != 2 * a_dim {
        return Err(Error::Param(format!(
            "policy output has {} cols, bounds expect {}",
            policy_out.ncols(),
            2 * a_dim
        )));
    }
    let batch = policy_out.nrows();
    let mut actions = Array2::zeros((batch, a_dim));
    let mut logp = Array1::zeros(batch);
    let mut tanh_z = Array2::zeros((batch, a_dim));
    let mut eps = Array2::zeros((batch, a_dim));
    let mut std = Array2::zeros((batch, a_dim));
    let mut clamp_mask = Array2::zeros((batch, a_dim));
    for i in 0..batch {
        let mut lp = 0.0;
        for d in 0..a_dim {
            let mean = policy_out[[i, d]];
            let raw = policy_out[[i, a_dim + d]];
            let log_std = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
            let sd = log_std.exp();
            let e: f64 = match rng.as_deref_mut() {
                Some(r) => StandardNormal.sample(r),
                None => 0.0,
            };
            let z = mean + sd * e;
            let th = z.tanh();
            let (lo, hi) = (bounds.lo[d], bounds.hi[d]);
            actions[[i, d]] = (bounds.center[d] + bounds.scale[d] * th).clamp(lo, hi);
            lp += -log_std - HALF_LN_2PI - 0.5 * e * e
                - bounds.scale[d].ln()
                - 2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z));
            tanh_z[[i, d]] = th;
            eps[[i, d]] = e;
            std[[i, d]] = sd;
            clamp_mask[[i, d]] = if raw > LOG_STD_MIN && raw < LOG_STD_MAX { 1.0 } else { 0.0 };
        }
        logp[i] = lp;
    }
    Ok(Squashed {
        actions,
        logp,
        tanh_z,
        eps,
        std,
        clamp_mask,
        scale: bounds.scale.clone(),
    })
}

/// Gradient of a scalar loss with respect to the policy-net output, given
/// `∂L/∂action` and `∂L/∂logp` (ε held fixed — the reparameterization trick).
pub fn squash_backward(sq: &Squashed, g_actions: &Array2<f64>, g_logp: &Array1<f64>) -> Array2<f64> {
    let (batch, a_dim) = sq.actions.dim();
    assert_eq!(g_actions.dim(), (batch, a_dim));
    assert_eq!(g_logp.len(), batch);
    let mut g = Array2::zeros((batch, 2 * a_dim));
    for i in 0..batch {
        for d in 0..a_dim {
            let th = sq.tanh_z[[i, d]];
            // z feeds the action (via scale·tanh) and the logp correction
            // (d/dz of the softplus identity is 2·tanh z).
            let g_z = g_logp[i] * 2.0 * th + g_actions[[i, d]] * sq.scale[d] * (1.0 - th * th);
            g[[i, d]] = g_z;
            g[[i, a_dim + d]] =
                (g_z * sq.std[[i, d]] * sq.eps[[i, d]] - g_logp[i]) * sq.clamp_mask[[i, d]];
        }
    }
    g
}

/// Log-probability density of a given action under `[mean | log_stdev]`
/// (diagnostics; inverts the squash).
pub fn logp_of_action(policy_out: &[f64], bounds: &ActionBounds, action: &[f64]) -> Result<f64> {
    let a_dim = bounds.dim();
    if policy_out.len() != 2 * a_dim || action.len() != a_dim {
        return Err(Error::Param("logp_of_action dimension mismatch".into()));
    }
    let mut lp = 0.0;
    for d in 0..a_dim {
        let u = (action[d] - bounds.center[d]) / bounds.scale[d];
        if !(u.abs() < 1.0) {
            return Err(Error::Param(format!("action {} outside open bounds", action[d])));
        }
        let z = u.atanh();
        let log_std = policy_out[a_dim + d].clamp(LOG_STD_MIN, LOG_STD_MAX);
        let e = (z - policy_out[d]) / log_std.exp();
        lp += -log_std - HALF_LN_2PI - 0.5 * e * e
            - bounds.scale[d].ln()
            - 2.0 * (std::f64::consts::LN_2 - z - softplus(-2.0 * z));
    }
    Ok(lp)
}
