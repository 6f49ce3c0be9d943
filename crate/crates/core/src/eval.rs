//! Ground truth and error metrics.

use nalgebra::{DMatrix, DVector};

use crate::envs::MrpSpec;
use crate::error::{Error, Result};
use crate::features::NoiseMask;
use crate::sparse::SparseBinaryFeatures;

/// State values of an MRP.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    pub v: Vec<f64>,
    pub gamma: f64,
}

impl ValueTable {
    /// `max_s |v_s − Σ p(s'|s)(r + γ v_{s'})|`
    pub fn bellman_residual(&self, mrp: &MrpSpec) -> f64 {
        (0..mrp.n_states())
            .map(|s| {
                let backup: f64 = mrp
                    .outcomes(s)
                    .iter()
                    .map(|o| o.prob * (o.reward + self.gamma * self.v[o.next]))
                    .sum();
                (self.v[s] - backup).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `(I − γP) v = r̄` by LU decomposition.
pub fn solve_true_values(mrp: &MrpSpec) -> Result<ValueTable> {
    let gamma = mrp.gamma();
    if gamma >= 1.0 {
        return Err(Error::config(format!("exact values need gamma < 1, got {gamma}")));
    }
    let n = mrp.n_states();
    let p = mrp.transition_matrix();
    let a = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - gamma * p[i][j]);
    let b = DVector::from_vec(mrp.expected_rewards());
    let v = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Numerical("singular Bellman system".into()))?;
    Ok(ValueTable {
        v: v.iter().copied().collect(),
        gamma,
    })
}

/// Root mean squared error of `wᵀφ(s)` against the true values, weighting
/// every state equally.
pub fn rmse<F>(w: &[f64], featurizer: F, truth: &ValueTable) -> Result<f64>
where
    F: Fn(usize) -> Result<SparseBinaryFeatures>,
{
    let n = truth.v.len();
    let mut total = 0.0;
    for (s, &v) in truth.v.iter().enumerate() {
        let e = featurizer(s)?.dot(w)? - v;
        total += e * e;
    }
    Ok((total / n as f64).sqrt())
}

/// Realised discounted returns, `G_t = r[t] + γ G_{t+1}` with `G_T = 0`.
/// `rewards[t]` is the reward received on leaving step `t`.
pub fn returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut g = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for t in (0..rewards.len()).rev() {
        acc = rewards[t] + gamma * acc;
        g[t] = acc;
    }
    g
}

/// `Σ_t |prediction_t − G_t|` over the whole series.
pub fn return_error(predictions: &[f64], rewards: &[f64], gamma: f64) -> Result<f64> {
    check_aligned(predictions, rewards)?;
    Ok(predictions
        .iter()
        .zip(returns(rewards, gamma))
        .map(|(p, g)| (p - g).abs())
        .sum())
}

/// Number of leading steps whose returns are observed to within
/// `tail_tolerance`: those with `γ^{T−t} < tail_tolerance`.
pub fn evaluable_len(len: usize, gamma: f64, tail_tolerance: f64) -> usize {
    if gamma <= 0.0 {
        return len;
    }
    if gamma >= 1.0 {
        return 0;
    }
    // γ^k < tol  ⇔  k > ln(tol)/ln(γ)
    let k_min = (tail_tolerance.ln() / gamma.ln()).floor() as usize + 1;
    len.saturating_sub(k_min - 1)
}

/// Absolute prediction error against realised returns, per step, truncated
/// so the unobserved tail of each return weighs less than `tail_tolerance`.
pub fn truncated_return_errors(
    predictions: &[f64],
    rewards: &[f64],
    gamma: f64,
    tail_tolerance: f64,
) -> Result<Vec<f64>> {
    check_aligned(predictions, rewards)?;
    let keep = evaluable_len(rewards.len(), gamma, tail_tolerance);
    Ok(predictions
        .iter()
        .zip(returns(rewards, gamma))
        .take(keep)
        .map(|(p, g)| (p - g).abs())
        .collect())
}

fn check_aligned(predictions: &[f64], rewards: &[f64]) -> Result<()> {
    if predictions.len() != rewards.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            actual: predictions.len(),
        });
    }
    Ok(())
}

/// Step sizes of noisy features against clean ones.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceReport {
    pub mean_alpha_noisy: f64,
    pub mean_alpha_clean: f64,
    pub max_alpha_noisy: f64,
    pub min_alpha_clean: f64,
    /// `max_alpha_noisy < min_alpha_clean`
    pub separated: bool,
}

/// Averages each feature's final step size across trials and compares the
/// masked features with the rest.
pub fn relevance_report(final_alphas: &[Vec<f64>], mask: &NoiseMask) -> Result<RelevanceReport> {
    let first = final_alphas
        .first()
        .ok_or_else(|| Error::config("relevance report needs at least one trial"))?;
    let dim = first.len();
    if let Some(bad) = final_alphas.iter().find(|a| a.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: bad.len(),
        });
    }
    mask.validate(dim, None)?;
    let trials = final_alphas.len() as f64;
    let mean: Vec<f64> = (0..dim)
        .map(|i| final_alphas.iter().map(|a| a[i]).sum::<f64>() / trials)
        .collect();

    let (noisy, clean): (Vec<_>, Vec<_>) = mean.into_iter().enumerate().partition(|(i, _)| mask.contains(*i));
    if noisy.is_empty() || clean.is_empty() {
        return Err(Error::config("relevance report needs both noisy and clean features"));
    }
    let avg = |xs: &[(usize, f64)]| xs.iter().map(|x| x.1).sum::<f64>() / xs.len() as f64;
    let max_alpha_noisy = noisy.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let min_alpha_clean = clean.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    Ok(RelevanceReport {
        mean_alpha_noisy: avg(&noisy),
        mean_alpha_clean: avg(&clean),
        max_alpha_noisy,
        min_alpha_clean,
        separated: max_alpha_noisy < min_alpha_clean,
    })
}
