//! Episode statistics: Sharpe ratio over per-step PNL returns, evaluation
//! summaries, and the small sample-statistics helpers shared by the
//! simulators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Arithmetic mean; 0 for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased (n−1) sample variance; 0 for fewer than two points.
pub fn sample_var(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Sample standard deviation, (n−1) convention.
pub fn sample_std(xs: &[f64]) -> f64 {
    sample_var(xs).sqrt()
}

/// Pearson correlation of two equal-length samples; `None` when either side
/// has zero dispersion.
pub fn sample_corr(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len(), "correlation inputs must align");
    if xs.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// 95% confidence interval of the mean: (mean, lo, hi), normal approximation.
pub fn mean_ci95(xs: &[f64]) -> (f64, f64, f64) {
    let m = mean(xs);
    let se = if xs.len() < 2 {
        0.0
    } else {
        sample_std(xs) / (xs.len() as f64).sqrt()
    };
    (m, m - 1.96 * se, m + 1.96 * se)
}

/// Sharpe ratio of a cumulative PNL series: mean of per-step returns
/// `PNL_t − PNL_{t−1}` divided by their sample standard deviation.
///
/// Returns `Ok(None)` when the returns have zero dispersion (the ratio is
/// undefined, not infinite). Series shorter than 3 points cannot produce the
/// two returns needed for a spread estimate and are rejected.
pub fn sharpe_ratio(pnl: &[f64]) -> Result<Option<f64>> {
    if pnl.len() < 3 {
        return Err(Error::Param(format!(
            "sharpe ratio needs a PNL series of at least 3 points, got {}",
            pnl.len()
        )));
    }
    let returns: Vec<f64> = pnl.windows(2).map(|w| w[1] - w[0]).collect();
    let sd = sample_std(&returns);
    if sd == 0.0 {
        return Ok(None);
    }
    Ok(Some(mean(&returns) / sd))
}

/// Per-episode evaluation record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub seed: u64,
    pub total_reward: f64,
    pub net_pnl: f64,
    /// `None` when the episode PNL had zero dispersion.
    pub sharpe: Option<f64>,
    pub mean_abs_position: f64,
    pub steps: usize,
}

/// Aggregate over a batch of evaluation episodes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub mean_net_pnl: f64,
    pub std_net_pnl: f64,
    /// Mean over episodes with a defined Sharpe ratio.
    pub mean_sharpe: Option<f64>,
    pub mean_abs_position: f64,
}

impl EvalSummary {
    pub fn from_episodes(eps: &[EpisodeStats]) -> Self {
        let rewards: Vec<f64> = eps.iter().map(|e| e.total_reward).collect();
        let pnls: Vec<f64> = eps.iter().map(|e| e.net_pnl).collect();
        let sharpes: Vec<f64> = eps.iter().filter_map(|e| e.sharpe).collect();
        EvalSummary {
            episodes: eps.len(),
            mean_reward: mean(&rewards),
            std_reward: sample_std(&rewards),
            mean_net_pnl: mean(&pnls),
            std_net_pnl: sample_std(&pnls),
            mean_sharpe: if sharpes.is_empty() { None } else { Some(mean(&sharpes)) },
            mean_abs_position: mean(&eps.iter().map(|e| e.mean_abs_position).collect::<Vec<_>>()),
        }
    }
}
