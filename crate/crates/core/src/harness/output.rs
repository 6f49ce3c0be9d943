use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::relevance::RelevanceResult;
use super::sweep::{CellKey, SweepResult};
use crate::error::{Error, Result};

pub const HEADER: [&str; 9] = [
    "experiment",
    "algorithm",
    "alpha0",
    "theta",
    "lambda",
    "trial",
    "step",
    "metric",
    "value",
];

/// Files written by one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub manifest: PathBuf,
    pub csvs: Vec<PathBuf>,
}

struct LongWriter<'a> {
    experiment: &'a str,
    path: PathBuf,
    inner: csv::Writer<fs::File>,
}

impl<'a> LongWriter<'a> {
    fn create(dir: &Path, name: &str, experiment: &'a str) -> Result<Self> {
        let path = dir.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut inner = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(file);
        inner.write_record(HEADER)?;
        Ok(LongWriter {
            experiment,
            path,
            inner,
        })
    }

    fn row(&mut self, key: &CellKey, trial: &str, step: usize, metric: &str, value: f64) -> Result<()> {
        self.inner.write_record([
            self.experiment,
            key.algorithm.name(),
            &key.alpha0.to_string(),
            &key.theta.to_string(),
            &key.lambda.to_string(),
            trial,
            &step.to_string(),
            metric,
            &value.to_string(),
        ])?;
        Ok(())
    }

    fn finish(mut self) -> Result<PathBuf> {
        self.inner.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.path)
    }
}

fn prepare(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes the resolved configuration as `manifest.toml`. Feeding it back to
/// the harness reproduces the run.
pub fn write_manifest(cfg: &ExperimentConfig, dir: &Path) -> Result<PathBuf> {
    prepare(dir)?;
    let path = dir.join("manifest.toml");
    fs::write(&path, cfg.manifest()?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// `curves.csv` holds every trial's learning curve plus the trial mean;
/// `summary.csv` holds one set of scalar metrics per cell.
pub fn write_sweep(cfg: &ExperimentConfig, result: &SweepResult, dir: &Path) -> Result<OutputFiles> {
    prepare(dir)?;
    let experiment = cfg.experiment.name();
    let metric = result.metric;

    let mut curves = LongWriter::create(dir, "curves.csv", experiment)?;
    for cell in &result.cells {
        for (trial, curve) in cell.trial_curves.iter().enumerate() {
            let trial = trial.to_string();
            for (k, &step) in cell.log_steps.iter().enumerate() {
                let value = curve.get(k).copied().unwrap_or(f64::INFINITY);
                curves.row(&cell.key, &trial, step, metric, value)?;
            }
        }
        for (&step, &value) in cell.log_steps.iter().zip(&cell.mean_curve) {
            curves.row(&cell.key, "mean", step, metric, value)?;
        }
    }
    let curves = curves.finish()?;

    let mut summary = LongWriter::create(dir, "summary.csv", experiment)?;
    for cell in &result.cells {
        let step = cfg.steps;
        summary.row(
            &cell.key,
            "mean",
            step,
            &format!("asymptotic_{metric}"),
            cell.asymptotic_error,
        )?;
        if let Some(total) = cell.total_error {
            summary.row(&cell.key, "mean", step, &format!("total_{metric}"), total)?;
        }
        summary.row(&cell.key, "mean", step, "diverged_trials", cell.diverged_trials as f64)?;
        if let Some(ess) = cell.max_effective_step_size {
            summary.row(&cell.key, "mean", step, "max_effective_step_size", ess)?;
        }
    }
    let summary = summary.finish()?;

    Ok(OutputFiles {
        manifest: write_manifest(cfg, dir)?,
        csvs: vec![curves, summary],
    })
}

/// `alphas.csv` holds the trial-mean step size of every feature at every
/// logged step, `mask.csv` the noisy indices and `summary.csv` the
/// separation statistics.
pub fn write_relevance(cfg: &ExperimentConfig, result: &RelevanceResult, dir: &Path) -> Result<OutputFiles> {
    prepare(dir)?;
    let experiment = cfg.experiment.name();
    let key = CellKey {
        algorithm: cfg.algorithm,
        alpha0: cfg.alpha0_grid[0],
        theta: cfg.theta_grid[0],
        lambda: cfg.lambda_grid[0],
    };

    let mut alphas = LongWriter::create(dir, "alphas.csv", experiment)?;
    for (&step, row) in result.log_steps.iter().zip(&result.mean_alpha_trajectory) {
        for (i, &a) in row.iter().enumerate() {
            alphas.row(&key, "mean", step, &format!("alpha:{i}"), a)?;
        }
    }
    let alphas = alphas.finish()?;

    let mask_path = dir.join("mask.csv");
    let mut mask = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(&mask_path)?;
    mask.write_record(["index", "activation_prob"])?;
    for &i in &result.mask.noisy_indices {
        mask.write_record([i.to_string(), result.mask.activation_prob.to_string()])?;
    }
    mask.flush().map_err(|e| Error::io(&mask_path, e))?;

    let mut summary = LongWriter::create(dir, "summary.csv", experiment)?;
    let step = cfg.steps;
    let r = &result.report;
    for (metric, value) in [
        ("mean_alpha_noisy", r.mean_alpha_noisy),
        ("mean_alpha_clean", r.mean_alpha_clean),
        ("max_alpha_noisy", r.max_alpha_noisy),
        ("min_alpha_clean", r.min_alpha_clean),
        ("separated", f64::from(u8::from(r.separated))),
        ("non_decreasing_noisy", result.non_decreasing_noisy().len() as f64),
        ("activation_rate", result.activation_rate),
        ("max_effective_step_size", result.max_effective_step_size),
    ] {
        summary.row(&key, "mean", step, metric, value)?;
    }
    for (trial, &e) in result.return_errors.iter().enumerate() {
        summary.row(&key, &trial.to_string(), step, "total_return_error", e)?;
    }
    let summary = summary.finish()?;

    Ok(OutputFiles {
        manifest: write_manifest(cfg, dir)?,
        csvs: vec![alphas, mask_path, summary],
    })
}
