use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{Algorithm, ExperimentConfig, ExperimentKind};
use crate::envs::{signal_stream, Gridworld, SignalStreamConfig};
use crate::error::{Error, Result};
use crate::eval::{solve_true_values, truncated_return_errors};
use crate::features::{one_hot, TileCoder};
use crate::learners::{effective_step_size_with, SupervisedLearner, TdLearner};
use crate::rng::{purpose, stream};
use crate::sparse::SparseBinaryFeatures;

/// Return-error steps are kept while the unobserved tail weighs at least this
/// much less than the first reward.
pub const RETURN_TAIL_TOLERANCE: f64 = 1e-4;

/// One point of a parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub algorithm: Algorithm,
    pub alpha0: f64,
    pub theta: f64,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    /// Step counts at which the curve was sampled.
    pub log_steps: Vec<usize>,
    pub trial_curves: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
    /// Mean of the last 10% of the mean curve; infinite if any trial diverged.
    pub asymptotic_error: f64,
    /// Mean over trials of the summed per-step error (signal experiment only).
    pub total_error: Option<f64>,
    pub diverged_trials: usize,
    /// Largest post-normalisation effective step size seen at any step, for
    /// the learners that normalise.
    pub max_effective_step_size: Option<f64>,
    /// Summed compute time of the cell's trials; not written to CSV.
    pub wall_time: Duration,
}

impl CellResult {
    pub fn diverged(&self) -> bool {
        self.diverged_trials > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub experiment: ExperimentKind,
    /// Name of the curve metric, e.g. `rmse`.
    pub metric: &'static str,
    pub cells: Vec<CellResult>,
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl SweepResult {
    pub fn cell(&self, algorithm: Algorithm, alpha0: f64, theta: f64, lambda: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| {
            c.key.algorithm == algorithm
                && same(c.key.alpha0, alpha0)
                && same(c.key.theta, theta)
                && same(c.key.lambda, lambda)
        })
    }

    pub fn cells_of(&self, algorithm: Algorithm) -> impl Iterator<Item = &CellResult> {
        self.cells.iter().filter(move |c| c.key.algorithm == algorithm)
    }
}

/// Mean of the last tenth of `xs` (at least one element).
pub fn final_tenth_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let n = (xs.len() / 10).max(1);
    xs[xs.len() - n..].iter().sum::<f64>() / n as f64
}

/// Mean of the first tenth of `xs` (at least one element).
pub fn first_tenth_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let n = (xs.len() / 10).max(1);
    xs[..n].iter().sum::<f64>() / n as f64
}

/// The grid cells in output order. Fixed-step TD ignores θ, so it gets one
/// cell per `(α₀, λ)` with θ recorded as zero.
pub fn grid_cells(cfg: &ExperimentConfig) -> Vec<CellKey> {
    let mut cells = Vec::new();
    let mut push_algorithm = |algorithm: Algorithm| {
        let thetas: &[f64] = if algorithm.uses_theta() {
            &cfg.theta_grid
        } else {
            &[0.0]
        };
        for &lambda in &cfg.lambda_grid {
            for &alpha0 in &cfg.alpha0_grid {
                for &theta in thetas {
                    cells.push(CellKey {
                        algorithm,
                        alpha0,
                        theta,
                        lambda,
                    });
                }
            }
        }
    };
    if cfg.td_baseline && cfg.algorithm != Algorithm::Td {
        push_algorithm(Algorithm::Td);
    }
    push_algorithm(cfg.algorithm);
    cells
}

struct TrialOutcome {
    curve: Vec<f64>,
    total: Option<f64>,
    diverged: bool,
    max_ess: Option<f64>,
    wall_time: Duration,
}

/// Runs every grid cell for the configured number of trials. Divergent
/// trials are flagged in their cell rather than aborting the sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::Gridworld => run_gridworld_sweep(cfg),
        ExperimentKind::SignalPrediction => run_signal_sweep(cfg),
        ExperimentKind::Relevance => Err(Error::config("the relevance experiment is a single run, not a sweep")),
    }
}

struct Trajectory {
    states: Vec<usize>,
    rewards: Vec<f64>,
}

/// Samples `steps` transitions from the start cell. The stream depends only
/// on the seed and trial, so every cell sees the same experience.
pub fn gridworld_trajectory(world: &Gridworld, steps: usize, seed: u64, trial: usize) -> (Vec<usize>, Vec<f64>) {
    let mut rng = stream(seed, &[purpose::ENVIRONMENT, trial as u64]);
    let mut cell = world.start();
    let mut states = Vec::with_capacity(steps + 1);
    let mut rewards = Vec::with_capacity(steps);
    states.push(world.index(cell));
    for _ in 0..steps {
        let (next, reward) = world.step(cell, &mut rng);
        rewards.push(reward);
        states.push(world.index(next));
        cell = next;
    }
    (states, rewards)
}

fn run_gridworld_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let world = Gridworld::new(cfg.gridworld.clone())?;
    let n = world.n_states();
    let truth = solve_true_values(&world.as_mrp(cfg.gamma)?)?;
    let features: Vec<SparseBinaryFeatures> = (0..n).map(|s| one_hot(s, n)).collect::<Result<_>>()?;
    let trajectories: Vec<Trajectory> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let (states, rewards) = gridworld_trajectory(&world, cfg.steps, cfg.seed, trial);
            Trajectory { states, rewards }
        })
        .collect();
    let cells = grid_cells(cfg);
    let log_steps: Vec<usize> = (1..=cfg.steps / cfg.log_interval)
        .map(|k| k * cfg.log_interval)
        .collect();

    let run = |key: &CellKey, traj: &Trajectory| -> Result<TrialOutcome> {
        let start = Instant::now();
        let algorithm = key.algorithm.td().expect("validated TD learner");
        let mut learner = TdLearner::new(algorithm, n, cfg.td_params(key.alpha0, key.theta, key.lambda))?;
        let mut curve = Vec::with_capacity(log_steps.len());
        let mut max_ess = None;
        let mut diverged = false;
        for t in 0..cfg.steps {
            let (phi, phi_next) = (&features[traj.states[t]], &features[traj.states[t + 1]]);
            match learner.step(phi, traj.rewards[t], phi_next) {
                Ok(report) => {
                    if report.effective_step_size.is_some() {
                        track_max(&mut max_ess, post_step_ess(&learner, phi, phi_next, cfg.gamma));
                    }
                }
                Err(e) if e.is_divergence() => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            }
            if (t + 1) % cfg.log_interval == 0 {
                let err = rmse_one_hot(learner.weights(), &truth.v);
                if !err.is_finite() {
                    diverged = true;
                    break;
                }
                curve.push(err);
            }
        }
        curve.resize(log_steps.len(), f64::INFINITY);
        Ok(TrialOutcome {
            curve,
            total: None,
            diverged,
            max_ess,
            wall_time: start.elapsed(),
        })
    };

    let outcomes = run_jobs(cells.len(), cfg.trials, |c, t| run(&cells[c], &trajectories[t]))?;
    Ok(SweepResult {
        experiment: cfg.experiment,
        metric: "rmse",
        cells: aggregate(cells, &log_steps, outcomes),
    })
}

/// RMSE of a tabular estimate, uniform over states.
fn rmse_one_hot(w: &[f64], truth: &[f64]) -> f64 {
    let sq: f64 = w.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    (sq / truth.len() as f64).sqrt()
}

/// Runs `cells × trials` jobs in parallel and returns the outcomes grouped by
/// cell, each in trial order.
fn run_jobs<F>(cells: usize, trials: usize, job: F) -> Result<Vec<Vec<TrialOutcome>>>
where
    F: Fn(usize, usize) -> Result<TrialOutcome> + Sync,
{
    let flat: Vec<TrialOutcome> = (0..cells * trials)
        .into_par_iter()
        .map(|k| job(k / trials, k % trials))
        .collect::<Result<_>>()?;
    let mut it = flat.into_iter();
    Ok((0..cells).map(|_| it.by_ref().take(trials).collect()).collect())
}

fn aggregate(keys: Vec<CellKey>, log_steps: &[usize], outcomes: Vec<Vec<TrialOutcome>>) -> Vec<CellResult> {
    keys.into_iter()
        .zip(outcomes)
        .map(|(key, trials)| {
            let n = trials.len() as f64;
            let mean_curve: Vec<f64> = (0..log_steps.len())
                .map(|k| {
                    trials
                        .iter()
                        .map(|t| t.curve.get(k).copied().unwrap_or(f64::INFINITY))
                        .sum::<f64>()
                        / n
                })
                .collect();
            let diverged_trials = trials.iter().filter(|t| t.diverged).count();
            let asymptotic_error = if diverged_trials > 0 {
                f64::INFINITY
            } else {
                final_tenth_mean(&mean_curve)
            };
            let total_error = trials[0].total.map(|_| {
                if diverged_trials > 0 {
                    f64::INFINITY
                } else {
                    trials.iter().map(|t| t.total.unwrap_or(f64::INFINITY)).sum::<f64>() / n
                }
            });
            let max_effective_step_size = trials.iter().filter_map(|t| t.max_ess).reduce(f64::max);
            CellResult {
                key,
                log_steps: log_steps.to_vec(),
                mean_curve,
                asymptotic_error,
                total_error,
                diverged_trials,
                max_effective_step_size,
                wall_time: trials.iter().map(|t| t.wall_time).sum(),
                trial_curves: trials.into_iter().map(|t| t.curve).collect(),
            }
        })
        .collect()
}

/// Tile-coded observations and the raw signal of one trial, `steps + 1`
/// entries each.
pub struct SignalTrial {
    pub features: Vec<SparseBinaryFeatures>,
    pub signal: Vec<f64>,
}

pub fn signal_trial(
    signal: &SignalStreamConfig,
    coder: &TileCoder,
    steps: usize,
    seed: u64,
    trial: usize,
) -> Result<SignalTrial> {
    let cfg = SignalStreamConfig {
        horizon: steps + 1,
        ..signal.clone()
    };
    let samples = signal_stream(cfg, stream(seed, &[purpose::SIGNAL, trial as u64]))?;
    let mut features = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    for s in samples {
        features.push(coder.encode(&s.inputs)?);
        values.push(s.signal);
    }
    Ok(SignalTrial {
        features,
        signal: values,
    })
}

/// Window means of per-step errors: window `k` covers steps
/// `[kL, (k+1)L)` and is logged at `(k+1)L`. Incomplete windows are dropped.
fn window_means(errors: &[f64], interval: usize) -> Vec<f64> {
    errors
        .chunks_exact(interval)
        .map(|w| w.iter().sum::<f64>() / interval as f64)
        .collect()
}

fn run_signal_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let coder = TileCoder::new(cfg.tiles.coder_config(&cfg.signal))?;
    let dim = coder.dim();
    let data: Vec<SignalTrial> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| signal_trial(&cfg.signal, &coder, cfg.steps, cfg.seed, trial))
        .collect::<Result<_>>()?;
    let cells = grid_cells(cfg);
    let supervised = cfg.algorithm.supervised().is_some();
    let evaluable = if supervised {
        cfg.steps
    } else {
        crate::eval::evaluable_len(cfg.steps, cfg.gamma, RETURN_TAIL_TOLERANCE)
    };
    let log_steps: Vec<usize> = (1..=evaluable / cfg.log_interval)
        .map(|k| k * cfg.log_interval)
        .collect();

    let run = |key: &CellKey, data: &SignalTrial| -> Result<TrialOutcome> {
        let start = Instant::now();
        let outcome = match (key.algorithm.td(), key.algorithm.supervised()) {
            (Some(algorithm), _) => {
                let mut learner = TdLearner::new(algorithm, dim, cfg.td_params(key.alpha0, key.theta, key.lambda))?;
                run_td_on_signal(cfg, &mut learner, data)?
            }
            (None, Some(algorithm)) => {
                let mut learner = SupervisedLearner::new(algorithm, dim, cfg.supervised_params(key.alpha0, key.theta))?;
                run_supervised_on_signal(cfg, &mut learner, data)?
            }
            (None, None) => unreachable!("every algorithm is TD or supervised"),
        };
        Ok(TrialOutcome {
            wall_time: start.elapsed(),
            ..outcome
        })
    };

    let outcomes = run_jobs(cells.len(), cfg.trials, |c, t| run(&cells[c], &data[t]))?;
    Ok(SweepResult {
        experiment: cfg.experiment,
        metric: if supervised { "abs_error" } else { "return_error" },
        cells: aggregate(cells, &log_steps, outcomes),
    })
}

/// Predicts the discounted sum of future signal values. The prediction for
/// step `t` is taken before the update at `t`.
fn run_td_on_signal(cfg: &ExperimentConfig, learner: &mut TdLearner, data: &SignalTrial) -> Result<TrialOutcome> {
    let steps = cfg.steps;
    let rewards = &data.signal[1..=steps];
    let mut predictions = Vec::with_capacity(steps);
    let mut max_ess = None;
    let mut diverged = false;
    for t in 0..steps {
        let (phi, phi_next) = (&data.features[t], &data.features[t + 1]);
        predictions.push(learner.predict(phi)?);
        match learner.step(phi, rewards[t], phi_next) {
            Ok(report) => {
                if report.effective_step_size.is_some() {
                    track_max(&mut max_ess, post_step_ess(learner, phi, phi_next, cfg.gamma));
                }
            }
            Err(e) if e.is_divergence() => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if diverged {
        return Ok(diverged_outcome(max_ess));
    }
    let errors = truncated_return_errors(&predictions, rewards, cfg.gamma, RETURN_TAIL_TOLERANCE)?;
    let total: f64 = errors.iter().sum();
    if !total.is_finite() {
        return Ok(diverged_outcome(max_ess));
    }
    Ok(TrialOutcome {
        curve: window_means(&errors, cfg.log_interval),
        total: Some(total),
        diverged: false,
        max_ess,
        wall_time: Duration::ZERO,
    })
}

/// One-step-ahead prediction of the signal from the tile-coded observation.
fn run_supervised_on_signal(
    cfg: &ExperimentConfig,
    learner: &mut SupervisedLearner,
    data: &SignalTrial,
) -> Result<TrialOutcome> {
    let mut errors = Vec::with_capacity(cfg.steps);
    let mut max_ess = None;
    for t in 0..cfg.steps {
        let x = data.features[t].to_dense();
        let target = data.signal[t + 1];
        let prediction = learner.predict(&x)?;
        match learner.step(&x, target) {
            Ok(report) => {
                if let Some(ess) = report.effective_step_size {
                    track_max(&mut max_ess, ess);
                }
            }
            Err(e) if e.is_divergence() => return Ok(diverged_outcome(max_ess)),
            Err(e) => return Err(e),
        }
        errors.push((prediction - target).abs());
    }
    let total: f64 = errors.iter().sum();
    if !total.is_finite() {
        return Ok(diverged_outcome(max_ess));
    }
    Ok(TrialOutcome {
        curve: window_means(&errors, cfg.log_interval),
        total: Some(total),
        diverged: false,
        max_ess,
        wall_time: Duration::ZERO,
    })
}

fn diverged_outcome(max_ess: Option<f64>) -> TrialOutcome {
    TrialOutcome {
        curve: Vec::new(),
        total: Some(f64::INFINITY),
        diverged: true,
        max_ess,
        wall_time: Duration::ZERO,
    }
}

/// Effective step size of the transition just learned from, recomputed from
/// the learner's state after the update (the update leaves `α` and `z` as
/// the weight step used them).
fn post_step_ess(learner: &TdLearner, phi: &SparseBinaryFeatures, phi_next: &SparseBinaryFeatures, gamma: f64) -> f64 {
    effective_step_size_with(
        |i| learner.step_size(i),
        learner.eligibility_trace(),
        phi,
        phi_next,
        gamma,
    )
}

fn track_max(slot: &mut Option<f64>, value: f64) {
    *slot = Some(slot.map_or(value, |m| m.max(value)));
}
