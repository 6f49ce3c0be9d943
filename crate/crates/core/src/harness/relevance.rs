use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::sweep::{final_tenth_mean, first_tenth_mean, signal_trial, RETURN_TAIL_TOLERANCE};
use crate::error::{Error, Result};
use crate::eval::{relevance_report, truncated_return_errors, RelevanceReport};
use crate::features::{inject_noise, NoiseMask, TileCoder};
use crate::learners::{effective_step_size_with, TdAlgorithm, TdLearner};
use crate::rng::{purpose, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceResult {
    pub mask: NoiseMask,
    pub log_steps: Vec<usize>,
    /// Trial-mean step size of every feature, one row per logged step.
    pub mean_alpha_trajectory: Vec<Vec<f64>>,
    /// Step sizes at the end of each trial.
    pub final_alphas: Vec<Vec<f64>>,
    pub report: RelevanceReport,
    /// Fraction of noisy-feature slots that were active, pooled over steps
    /// and trials.
    pub activation_rate: f64,
    pub max_effective_step_size: f64,
    /// Summed truncated return error of each trial.
    pub return_errors: Vec<f64>,
    pub wall_time: Duration,
}

impl RelevanceResult {
    /// Noisy features whose trial-mean step size over the last tenth of the
    /// logged steps is not below its mean over the first tenth.
    pub fn non_decreasing_noisy(&self) -> Vec<usize> {
        self.mask
            .noisy_indices
            .iter()
            .copied()
            .filter(|&i| {
                let series: Vec<f64> = self.mean_alpha_trajectory.iter().map(|row| row[i]).collect();
                !(final_tenth_mean(&series) < first_tenth_mean(&series))
            })
            .collect()
    }
}

struct TrialRun {
    alpha_trajectory: Vec<Vec<f64>>,
    final_alphas: Vec<f64>,
    activations: u64,
    max_ess: f64,
    return_error: f64,
}

/// The noise mask of a relevance run: the configured indices, or a fraction of
/// the non-bias features drawn from the run seed.
pub fn relevance_mask(cfg: &ExperimentConfig) -> Result<NoiseMask> {
    let coder = cfg.tiles.coder_config(&cfg.signal);
    let mask = match &cfg.noise.indices {
        Some(indices) => NoiseMask::new(indices.clone(), cfg.noise.activation_prob)?,
        None => NoiseMask::draw(
            coder.memory_size,
            cfg.noise.fraction,
            cfg.noise.activation_prob,
            &mut stream(cfg.seed, &[purpose::NOISE_MASK]),
        )?,
    };
    mask.validate(coder.dim(), coder.bias_index())?;
    Ok(mask)
}

/// AutoTIDBD on the tile-coded signal with a subset of features replaced by
/// coin flips. Any divergence aborts the run.
pub fn run_relevance(cfg: &ExperimentConfig) -> Result<RelevanceResult> {
    cfg.validate()?;
    if cfg.experiment != ExperimentKind::Relevance {
        return Err(Error::config(format!(
            "expected a relevance config, got `{}`",
            cfg.experiment
        )));
    }
    let start = Instant::now();
    let coder = TileCoder::new(cfg.tiles.coder_config(&cfg.signal))?;
    let dim = coder.dim();
    let mask = relevance_mask(cfg)?;
    let (alpha0, theta, lambda) = (cfg.alpha0_grid[0], cfg.theta_grid[0], cfg.lambda_grid[0]);
    let params = cfg.td_params(alpha0, theta, lambda);

    let runs: Vec<TrialRun> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialRun> {
            let data = signal_trial(&cfg.signal, &coder, cfg.steps, cfg.seed, trial)?;
            let mut noise_rng = stream(cfg.seed, &[purpose::NOISE_FEATURES, trial as u64]);
            let features: Vec<_> = data
                .features
                .iter()
                .map(|phi| inject_noise(phi, &mask, &mut noise_rng))
                .collect();
            let activations = features
                .iter()
                .map(|phi| phi.active().iter().filter(|&&i| mask.contains(i)).count() as u64)
                .sum();

            let mut learner = TdLearner::new(TdAlgorithm::Autotidbd, dim, params.clone())?;
            let rewards = &data.signal[1..=cfg.steps];
            let mut predictions = Vec::with_capacity(cfg.steps);
            let mut alpha_trajectory = Vec::new();
            let mut max_ess = f64::NEG_INFINITY;
            for t in 0..cfg.steps {
                let (phi, phi_next) = (&features[t], &features[t + 1]);
                predictions.push(learner.predict(phi)?);
                learner.step(phi, rewards[t], phi_next)?;
                let ess = effective_step_size_with(
                    |i| learner.step_size(i),
                    learner.eligibility_trace(),
                    phi,
                    phi_next,
                    cfg.gamma,
                );
                max_ess = max_ess.max(ess);
                if (t + 1) % cfg.log_interval == 0 {
                    alpha_trajectory.push(learner.expanded_step_sizes());
                }
            }
            let errors = truncated_return_errors(&predictions, rewards, cfg.gamma, RETURN_TAIL_TOLERANCE)?;
            Ok(TrialRun {
                alpha_trajectory,
                final_alphas: learner.expanded_step_sizes(),
                activations,
                max_ess,
                return_error: errors.iter().sum(),
            })
        })
        .collect::<Result<_>>()?;

    let n_trials = runs.len() as f64;
    let log_steps: Vec<usize> = (1..=cfg.steps / cfg.log_interval)
        .map(|k| k * cfg.log_interval)
        .collect();
    let mean_alpha_trajectory = (0..log_steps.len())
        .map(|k| {
            (0..dim)
                .map(|i| runs.iter().map(|r| r.alpha_trajectory[k][i]).sum::<f64>() / n_trials)
                .collect()
        })
        .collect();
    let final_alphas: Vec<Vec<f64>> = runs.iter().map(|r| r.final_alphas.clone()).collect();
    let report = relevance_report(&final_alphas, &mask)?;
    let slots = mask.len() as f64 * (cfg.steps + 1) as f64 * n_trials;
    let activations: u64 = runs.iter().map(|r| r.activations).sum();

    Ok(RelevanceResult {
        log_steps,
        mean_alpha_trajectory,
        report,
        activation_rate: if slots > 0.0 {
            activations as f64 / slots
        } else {
            f64::NAN
        },
        max_effective_step_size: runs.iter().map(|r| r.max_ess).fold(f64::NEG_INFINITY, f64::max),
        return_errors: runs.iter().map(|r| r.return_error).collect(),
        final_alphas,
        mask,
        wall_time: start.elapsed(),
    })
}
