use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{BetaClamp, StepReport};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisedAlgorithm {
    Idbd,
    Autostep,
}

impl SupervisedAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            SupervisedAlgorithm::Idbd => "idbd",
            SupervisedAlgorithm::Autostep => "autostep",
        }
    }
}

impl fmt::Display for SupervisedAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SupervisedAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "idbd" => Ok(SupervisedAlgorithm::Idbd),
            "autostep" => Ok(SupervisedAlgorithm::Autostep),
            _ => Err(Error::config(format!("unknown supervised algorithm `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisedParams {
    /// Meta step size (`μ` in AutoStep).
    pub theta: f64,
    /// Normaliser decay horizon (AutoStep only).
    pub tau: f64,
    pub alpha0: f64,
    /// Apply `[·]⁺` to IDBD's `h` decay factor. AutoStep never clips: its
    /// normalisation keeps the factor non-negative.
    pub clip_h: bool,
    pub beta_clamp: Option<BetaClamp>,
}

impl Default for SupervisedParams {
    fn default() -> Self {
        SupervisedParams {
            theta: 0.01,
            tau: 1e4,
            alpha0: 0.05,
            clip_h: true,
            beta_clamp: None,
        }
    }
}

/// Linear least-mean-squares learner with IDBD or AutoStep step-size
/// adaptation, for dense real-valued inputs.
#[derive(Debug, Clone)]
pub struct SupervisedLearner {
    algorithm: SupervisedAlgorithm,
    params: SupervisedParams,
    w: Vec<f64>,
    beta: Vec<f64>,
    h: Vec<f64>,
    eta: Vec<f64>,
    steps: u64,
}

impl SupervisedLearner {
    pub fn new(algorithm: SupervisedAlgorithm, n_features: usize, params: SupervisedParams) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::config("learner needs at least one feature"));
        }
        if !(params.theta >= 0.0 && params.theta.is_finite()) {
            return Err(Error::config(format!(
                "theta must be finite and non-negative, got {}",
                params.theta
            )));
        }
        if !(params.alpha0 > 0.0 && params.alpha0.is_finite()) {
            return Err(Error::config(format!(
                "alpha0 must be finite and positive, got {}",
                params.alpha0
            )));
        }
        if algorithm == SupervisedAlgorithm::Autostep && !(params.tau > 0.0) {
            return Err(Error::config(format!("tau must be positive, got {}", params.tau)));
        }
        if let Some(c) = &params.beta_clamp {
            c.validate()?;
        }
        let beta0 = params.alpha0.ln();
        Ok(SupervisedLearner {
            algorithm,
            w: vec![0.0; n_features],
            beta: vec![beta0; n_features],
            h: vec![0.0; n_features],
            eta: vec![0.0; n_features],
            steps: 0,
            params,
        })
    }

    pub fn algorithm(&self) -> SupervisedAlgorithm {
        self.algorithm
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn meta_weights(&self) -> &[f64] {
        &self.beta
    }

    pub fn h_trace(&self) -> &[f64] {
        &self.h
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        self.beta.iter().map(|b| b.exp()).collect()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(dot(&self.w, x))
    }

    pub fn step(&mut self, x: &[f64], target: f64) -> Result<StepReport> {
        match self.algorithm {
            SupervisedAlgorithm::Idbd => self.idbd_step(x, target),
            SupervisedAlgorithm::Autostep => self.autostep_step(x, target),
        }
    }

    pub fn idbd_step(&mut self, x: &[f64], target: f64) -> Result<StepReport> {
        let delta = self.error(x, target)?;
        let theta = self.params.theta;
        let clamp = self.params.beta_clamp;
        for i in 0..self.w.len() {
            let xi = x[i];
            BetaClamp::apply(clamp.as_ref(), &mut self.beta[i], theta * delta * xi * self.h[i]);
            let a = self.step_size(i)?;
            self.w[i] += a * delta * xi;
            let mut decay = 1.0 - a * xi * xi;
            if self.params.clip_h {
                decay = decay.max(0.0);
            }
            self.h[i] = self.h[i] * decay + a * delta * xi;
        }
        self.steps += 1;
        Ok(self.report(delta, None, false))
    }

    pub fn autostep_step(&mut self, x: &[f64], target: f64) -> Result<StepReport> {
        let delta = self.error(x, target)?;
        let mu = self.params.theta;
        let inv_tau = 1.0 / self.params.tau;
        let clamp = self.params.beta_clamp;
        for i in 0..self.w.len() {
            let xi = x[i];
            let a = self.beta[i].exp();
            let update = (delta * xi * self.h[i]).abs();
            self.eta[i] = update.max(self.eta[i] + inv_tau * a * xi * xi * (update - self.eta[i]));
            if self.eta[i] != 0.0 {
                BetaClamp::apply(
                    clamp.as_ref(),
                    &mut self.beta[i],
                    mu * delta * xi * self.h[i] / self.eta[i],
                );
            }
        }

        let mut ess = 0.0;
        for i in 0..self.w.len() {
            ess += self.step_size(i)? * x[i] * x[i];
        }
        let normalized = ess > 1.0;
        if normalized {
            let log_m = ess.ln();
            self.beta.iter_mut().for_each(|b| *b -= log_m);
        }

        let mut ess_after = 0.0;
        for i in 0..self.w.len() {
            let xi = x[i];
            let a = self.step_size(i)?;
            ess_after += a * xi * xi;
            self.w[i] += a * delta * xi;
            let decay = 1.0 - a * xi * xi;
            debug_assert!(decay >= -1e-12, "AutoStep h decay factor went negative: {decay}");
            self.h[i] = self.h[i] * decay + a * delta * xi;
        }
        self.steps += 1;
        Ok(self.report(delta, Some(ess_after), normalized))
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn error(&self, x: &[f64], target: f64) -> Result<f64> {
        self.check_dim(x)?;
        let delta = target - dot(&self.w, x);
        if !delta.is_finite() {
            return Err(Error::Divergence {
                step: self.steps,
                what: format!("non-finite prediction error {delta}"),
            });
        }
        Ok(delta)
    }

    fn step_size(&self, i: usize) -> Result<f64> {
        let a = self.beta[i].exp();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Divergence {
                step: self.steps,
                what: format!("step size exp({}) left (0, inf)", self.beta[i]),
            });
        }
        Ok(a)
    }

    fn report(&self, delta: f64, effective_step_size: Option<f64>, normalization_applied: bool) -> StepReport {
        StepReport {
            delta,
            effective_step_size,
            step_sizes: self.step_sizes(),
            normalization_applied,
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_input_changes_nothing() {
        for algorithm in [SupervisedAlgorithm::Idbd, SupervisedAlgorithm::Autostep] {
            let mut l = SupervisedLearner::new(algorithm, 3, SupervisedParams::default()).unwrap();
            l.step(&[1.0, 0.5, -1.0], 2.0).unwrap();
            l.step(&[0.5, 1.0, 1.0], -1.0).unwrap();
            let (w, b, h) = (l.weights().to_vec(), l.meta_weights().to_vec(), l.h_trace().to_vec());
            let r = l.step(&[0.0; 3], 4.0).unwrap();
            assert_eq!(r.delta, 4.0);
            assert_eq!(l.weights(), &w[..], "{algorithm}");
            assert_eq!(l.meta_weights(), &b[..], "{algorithm}");
            assert_eq!(l.h_trace(), &h[..], "{algorithm}");
        }
    }

    #[test]
    fn autostep_guard_keeps_inactive_step_sizes() {
        let mut l = SupervisedLearner::new(SupervisedAlgorithm::Autostep, 2, SupervisedParams::default()).unwrap();
        // Feature 1 is never active, so η_1 stays zero and α_1 is untouched.
        for k in 0..10 {
            l.step(&[1.0, 0.0], k as f64).unwrap();
        }
        assert_eq!(l.eta()[1], 0.0);
        assert_eq!(l.meta_weights()[1], 0.05f64.ln());
    }

    #[test]
    fn autostep_rejects_non_positive_tau() {
        let p = SupervisedParams {
            tau: 0.0,
            ..SupervisedParams::default()
        };
        assert!(SupervisedLearner::new(SupervisedAlgorithm::Autostep, 1, p.clone())
            .unwrap_err()
            .is_config());
        assert!(SupervisedLearner::new(SupervisedAlgorithm::Idbd, 1, p).is_ok());
    }

    #[test]
    fn autostep_normalises_large_inputs() {
        let mut l = SupervisedLearner::new(
            SupervisedAlgorithm::Autostep,
            2,
            SupervisedParams {
                alpha0: 0.5,
                ..SupervisedParams::default()
            },
        )
        .unwrap();
        let r = l.step(&[2.0, 1.0], 1.0).unwrap();
        assert!(r.normalization_applied);
        assert!(r.effective_step_size.unwrap() <= 1.0 + 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut l = SupervisedLearner::new(SupervisedAlgorithm::Idbd, 2, SupervisedParams::default()).unwrap();
        assert!(l.step(&[1.0], 1.0).unwrap_err().is_config());
    }
}
