use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{effective_step_size_with, BetaClamp, StepReport};
use crate::error::{Error, Result};
use crate::sparse::SparseBinaryFeatures;

/// The TD learners. All of them share one state layout and differ only in
/// how (and whether) they move the meta-weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdAlgorithm {
    /// TD(λ) with accumulating traces and a fixed step size.
    Td,
    /// TIDBD(λ) using the semi-gradient `−φ(s)`.
    TidbdSemi,
    /// TIDBD(λ) using the ordinary gradient `γφ(s') − φ(s)`.
    TidbdOrdinary,
    /// TIDBD(λ) with AutoStep normalisation of the meta-update and of the
    /// effective step size.
    Autotidbd,
}

impl TdAlgorithm {
    pub const ALL: [TdAlgorithm; 4] = [
        TdAlgorithm::Td,
        TdAlgorithm::TidbdSemi,
        TdAlgorithm::TidbdOrdinary,
        TdAlgorithm::Autotidbd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TdAlgorithm::Td => "td",
            TdAlgorithm::TidbdSemi => "tidbd-semi",
            TdAlgorithm::TidbdOrdinary => "tidbd-ordinary",
            TdAlgorithm::Autotidbd => "autotidbd",
        }
    }

    /// Whether θ has any effect.
    pub fn adapts_step_size(self) -> bool {
        !matches!(self, TdAlgorithm::Td)
    }
}

impl fmt::Display for TdAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TdAlgorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TdAlgorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown TD algorithm `{s}`")))
    }
}

/// Whether every feature owns a step size or all features share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepSizeMode {
    #[default]
    PerFeature,
    Shared,
}

/// Scope of AutoTIDBD's effective-step-size normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MClamp {
    /// One `M = max(effective step size, 1)` for the whole update; `ln M` is
    /// removed from every meta-weight whose trace is non-zero.
    #[default]
    Global,
    /// `M_i = max(−α_i (γφ'_i − φ_i) z_i, 1)` per feature.
    PerIndex,
}

/// Sign of the decay term in AutoTIDBD's normaliser recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EtaRule {
    /// `η_i − (1/τ) α_i (γφ'_i − φ_i) z_i (|δ φ_i h_i| − η_i)`.
    #[default]
    Listed,
    /// The same term added, as in supervised AutoStep.
    Autostep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TdParams {
    pub gamma: f64,
    pub lambda: f64,
    /// Meta step size.
    pub theta: f64,
    /// Normaliser decay horizon (AutoTIDBD only).
    pub tau: f64,
    /// Initial step size; meta-weights start at `ln alpha0`.
    pub alpha0: f64,
    pub mode: StepSizeMode,
    /// Apply the positive bound `[·]⁺` to the decay factor of `h`.
    pub clip_h: bool,
    pub m_clamp: MClamp,
    pub eta_rule: EtaRule,
    pub beta_clamp: Option<BetaClamp>,
}

impl Default for TdParams {
    fn default() -> Self {
        TdParams {
            gamma: 0.99,
            lambda: 0.0,
            theta: 0.0,
            tau: 1e4,
            alpha0: 0.05,
            mode: StepSizeMode::PerFeature,
            clip_h: true,
            m_clamp: MClamp::Global,
            eta_rule: EtaRule::Listed,
            beta_clamp: None,
        }
    }
}

impl TdParams {
    pub fn validate(&self, algorithm: TdAlgorithm) -> Result<()> {
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("gamma must lie in [0, 1], got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::config(format!("lambda must lie in [0, 1], got {}", self.lambda)));
        }
        if !(self.theta >= 0.0 && self.theta.is_finite()) {
            return Err(Error::config(format!(
                "theta must be finite and non-negative, got {}",
                self.theta
            )));
        }
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::config(format!(
                "alpha0 must be finite and positive, got {}",
                self.alpha0
            )));
        }
        if algorithm == TdAlgorithm::Autotidbd && !(self.tau > 0.0) {
            return Err(Error::config(format!("tau must be positive, got {}", self.tau)));
        }
        if let Some(clamp) = &self.beta_clamp {
            clamp.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MetaGradient {
    /// `−φ(s)`
    Semi,
    /// `γφ(s') − φ(s)`
    Ordinary,
}

/// State of a linear TD learner: weights `w`, meta-weights `β`, the
/// `∂w/∂β` trace `h`, the eligibility trace `z` and the AutoStep normaliser
/// `η`.
///
/// In [`StepSizeMode::Shared`] `β` and `η` hold a single entry while `h`
/// keeps one entry per weight, since each weight responds differently to the
/// shared step size.
#[derive(Debug, Clone)]
pub struct TdLearner {
    algorithm: TdAlgorithm,
    params: TdParams,
    w: Vec<f64>,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    h: Vec<f64>,
    z: Vec<f64>,
    eta: Vec<f64>,
    // γφ'_i − φ_i (or −φ_i), non-zero only at `touched`.
    grad: Vec<f64>,
    touched: Vec<usize>,
    steps: u64,
}

impl TdLearner {
    pub fn new(algorithm: TdAlgorithm, n_features: usize, params: TdParams) -> Result<Self> {
        if n_features == 0 {
            return Err(Error::config("learner needs at least one feature"));
        }
        params.validate(algorithm)?;
        let n_slots = match params.mode {
            StepSizeMode::PerFeature => n_features,
            StepSizeMode::Shared => 1,
        };
        let beta0 = params.alpha0.ln();
        Ok(TdLearner {
            algorithm,
            w: vec![0.0; n_features],
            beta: vec![beta0; n_slots],
            alpha: vec![beta0.exp(); n_slots],
            h: vec![0.0; n_features],
            z: vec![0.0; n_features],
            eta: vec![0.0; n_slots],
            grad: vec![0.0; n_features],
            touched: Vec::new(),
            steps: 0,
            params,
        })
    }

    pub fn algorithm(&self) -> TdAlgorithm {
        self.algorithm
    }

    pub fn params(&self) -> &TdParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn meta_weights(&self) -> &[f64] {
        &self.beta
    }

    /// `exp(β)`; one entry per feature or a single shared entry.
    pub fn step_sizes(&self) -> &[f64] {
        &self.alpha
    }

    /// Step size applied to feature `i`.
    pub fn step_size(&self, i: usize) -> f64 {
        self.alpha[self.slot(i)]
    }

    pub fn h_trace(&self) -> &[f64] {
        &self.h
    }

    pub fn eligibility_trace(&self) -> &[f64] {
        &self.z
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn predict(&self, phi: &SparseBinaryFeatures) -> Result<f64> {
        phi.dot(&self.w)
    }

    /// Per-feature step sizes expanded to the full feature dimension.
    pub fn expanded_step_sizes(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.step_size(i)).collect()
    }

    /// Runs the update of this learner's algorithm on one transition.
    pub fn step(
        &mut self,
        phi: &SparseBinaryFeatures,
        reward: f64,
        phi_next: &SparseBinaryFeatures,
    ) -> Result<StepReport> {
        match self.algorithm {
            TdAlgorithm::Td => self.td_lambda_step(phi, reward, phi_next),
            TdAlgorithm::TidbdSemi => self.tidbd_semi_step(phi, reward, phi_next),
            TdAlgorithm::TidbdOrdinary => self.tidbd_ordinary_step(phi, reward, phi_next),
            TdAlgorithm::Autotidbd => self.autotidbd_step(phi, reward, phi_next),
        }
    }

    /// TD(λ) with accumulating traces; `β` is left untouched.
    pub fn td_lambda_step(
        &mut self,
        phi: &SparseBinaryFeatures,
        reward: f64,
        phi_next: &SparseBinaryFeatures,
    ) -> Result<StepReport> {
        let delta = self.td_error(phi, reward, phi_next)?;
        self.accumulate_trace(phi);
        for i in 0..self.w.len() {
            let a = self.alpha[self.slot(i)];
            self.w[i] += a * delta * self.z[i];
        }
        self.steps += 1;
        Ok(self.report(delta, None, false))
    }

    pub fn tidbd_semi_step(
        &mut self,
        phi: &SparseBinaryFeatures,
        reward: f64,
        phi_next: &SparseBinaryFeatures,
    ) -> Result<StepReport> {
        self.tidbd_step(MetaGradient::Semi, phi, reward, phi_next)
    }

    pub fn tidbd_ordinary_step(
        &mut self,
        phi: &SparseBinaryFeatures,
        reward: f64,
        phi_next: &SparseBinaryFeatures,
    ) -> Result<StepReport> {
        self.tidbd_step(MetaGradient::Ordinary, phi, reward, phi_next)
    }

    fn tidbd_step(
        &mut self,
        kind: MetaGradient,
        phi: &SparseBinaryFeatures,
        reward: f64,
        phi_next: &SparseBinaryFeatures,
    ) -> Result<StepReport> {
        let delta = self.td_error(phi, reward, phi_next)?;
        self.load_gradient(kind, phi, phi_next);

        // β_i ← β_i − θ δ g_i h_i
        let theta = self.params.theta;
        let clamp = self.params.beta_clamp;
        match self.params.mode {
            StepSizeMode::PerFeature => {
                for &i in &self.touched {
                    let increment = -theta * delta * self.grad[i] * self.h[i];
                    BetaClamp::apply(clamp.as_ref(), &mut self.beta[i], increment);
                }
            }
            StepSizeMode::Shared => {
                let increment: f64 = self
                    .touched
                    .iter()
                    .map(|&i| -theta * delta * self.grad[i] * self.h[i])
                    .sum();
                BetaClamp::apply(clamp.as_ref(), &mut self.beta[0], increment);
            }
        }
        self.refresh_touched_step_sizes()?;

        self.accumulate_trace(phi);
        self.update_weights_and_h(delta);
        self.clear_gradient();
        self.steps += 1;
        Ok(self.report(delta, None, false))
    }

    /// AutoTIDBD: normalised ordinary-gradient meta-update followed by the
    /// effective-step-size clamp.
    ///
    /// The trace update runs first so that the normaliser and the clamp both
    /// see the trace the weight update will use; `z` does not depend on `β`,
    /// so nothing else changes.
    pub fn autotidbd_step(
        &mut self,
        phi: &SparseBinaryFeatures,
        reward: f64,
        phi_next: &SparseBinaryFeatures,
    ) -> Result<StepReport> {
        let delta = self.td_error(phi, reward, phi_next)?;
        self.load_gradient(MetaGradient::Ordinary, phi, phi_next);
        self.accumulate_trace(phi);

        let theta = self.params.theta;
        let inv_tau = 1.0 / self.params.tau;
        let sign = match self.params.eta_rule {
            EtaRule::Listed => -1.0,
            EtaRule::Autostep => 1.0,
        };
        let clamp = self.params.beta_clamp;

        match self.params.mode {
            StepSizeMode::PerFeature => {
                for &i in &self.touched {
                    let g = self.grad[i];
                    let magnitude = (delta * g * self.h[i]).abs();
                    let semi_magnitude = (delta * phi.value(i) * self.h[i]).abs();
                    let decayed =
                        self.eta[i] + sign * inv_tau * self.alpha[i] * g * self.z[i] * (semi_magnitude - self.eta[i]);
                    self.eta[i] = magnitude.max(decayed);
                }
                for &i in &self.touched {
                    if self.eta[i] != 0.0 {
                        let increment = -theta * (delta * self.grad[i] * self.h[i]) / self.eta[i];
                        BetaClamp::apply(clamp.as_ref(), &mut self.beta[i], increment);
                    }
                }
            }
            StepSizeMode::Shared => {
                let eta = self.eta[0];
                let alpha = self.alpha[0];
                let mut meta_grad = 0.0;
                let mut decay = 0.0;
                for &i in &self.touched {
                    let g = self.grad[i];
                    meta_grad += delta * g * self.h[i];
                    let semi_magnitude = (delta * phi.value(i) * self.h[i]).abs();
                    decay += sign * inv_tau * alpha * g * self.z[i] * (semi_magnitude - eta);
                }
                self.eta[0] = meta_grad.abs().max(eta + decay);
                if self.eta[0] != 0.0 {
                    let increment = -theta * meta_grad / self.eta[0];
                    BetaClamp::apply(clamp.as_ref(), &mut self.beta[0], increment);
                }
            }
        }
        self.refresh_touched_step_sizes()?;

        let normalized = match self.params.m_clamp {
            MClamp::Global => {
                let ess =
                    effective_step_size_with(|i| self.alpha[self.slot(i)], &self.z, phi, phi_next, self.params.gamma);
                if ess > 1.0 {
                    let log_m = ess.ln();
                    match self.params.mode {
                        StepSizeMode::PerFeature => {
                            for (b, &zi) in self.beta.iter_mut().zip(&self.z) {
                                if zi != 0.0 {
                                    *b -= log_m;
                                }
                            }
                        }
                        StepSizeMode::Shared => self.beta[0] -= log_m,
                    }
                    self.refresh_all_step_sizes()?;
                    true
                } else {
                    false
                }
            }
            MClamp::PerIndex => {
                let mut fired = false;
                match self.params.mode {
                    StepSizeMode::PerFeature => {
                        for &i in &self.touched {
                            let m = -self.alpha[i] * self.grad[i] * self.z[i];
                            if m > 1.0 {
                                self.beta[i] -= m.ln();
                                fired = true;
                            }
                        }
                    }
                    StepSizeMode::Shared => {
                        let m = self
                            .touched
                            .iter()
                            .map(|&i| -self.alpha[0] * self.grad[i] * self.z[i])
                            .fold(1.0, f64::max);
                        if m > 1.0 {
                            self.beta[0] -= m.ln();
                            fired = true;
                        }
                    }
                }
                if fired {
                    self.refresh_touched_step_sizes()?;
                }
                fired
            }
        };

        let ess = effective_step_size_with(|i| self.alpha[self.slot(i)], &self.z, phi, phi_next, self.params.gamma);
        self.update_weights_and_h(delta);
        self.clear_gradient();
        self.steps += 1;
        Ok(self.report(delta, Some(ess), normalized))
    }

    #[inline]
    fn slot(&self, i: usize) -> usize {
        match self.params.mode {
            StepSizeMode::PerFeature => i,
            StepSizeMode::Shared => 0,
        }
    }

    fn check_dim(&self, phi: &SparseBinaryFeatures) -> Result<()> {
        if phi.dim() != self.w.len() {
            return Err(Error::DimensionMismatch {
                expected: self.w.len(),
                actual: phi.dim(),
            });
        }
        Ok(())
    }

    fn td_error(&self, phi: &SparseBinaryFeatures, reward: f64, phi_next: &SparseBinaryFeatures) -> Result<f64> {
        self.check_dim(phi)?;
        self.check_dim(phi_next)?;
        let v: f64 = phi.active().iter().map(|&i| self.w[i]).sum();
        let v_next: f64 = phi_next.active().iter().map(|&i| self.w[i]).sum();
        let delta = reward + self.params.gamma * v_next - v;
        if !delta.is_finite() {
            return Err(Error::Divergence {
                step: self.steps,
                what: format!("non-finite TD error {delta}"),
            });
        }
        Ok(delta)
    }

    fn load_gradient(&mut self, kind: MetaGradient, phi: &SparseBinaryFeatures, phi_next: &SparseBinaryFeatures) {
        self.touched.clear();
        for &i in phi.active() {
            self.grad[i] -= 1.0;
            self.touched.push(i);
        }
        if kind == MetaGradient::Ordinary {
            for &i in phi_next.active() {
                self.grad[i] += self.params.gamma;
                if !phi.contains(i) {
                    self.touched.push(i);
                }
            }
        }
    }

    fn clear_gradient(&mut self) {
        for &i in &self.touched {
            self.grad[i] = 0.0;
        }
        self.touched.clear();
    }

    // z ← γλz + φ
    fn accumulate_trace(&mut self, phi: &SparseBinaryFeatures) {
        let decay = self.params.gamma * self.params.lambda;
        if decay == 0.0 {
            self.z.iter_mut().for_each(|z| *z = 0.0);
        } else {
            self.z.iter_mut().for_each(|z| *z *= decay);
        }
        for &i in phi.active() {
            self.z[i] += 1.0;
        }
    }

    // w_i += α_i δ z_i;  h_i ← h_i[1 + α_i g_i z_i]⁺ + α_i δ z_i
    fn update_weights_and_h(&mut self, delta: f64) {
        let clip = self.params.clip_h;
        for i in 0..self.w.len() {
            let zi = self.z[i];
            if zi == 0.0 {
                continue;
            }
            let a = self.alpha[self.slot(i)];
            let step = a * delta * zi;
            self.w[i] += step;
            let mut decay = 1.0 + a * self.grad[i] * zi;
            if clip {
                decay = decay.max(0.0);
            }
            self.h[i] = self.h[i] * decay + step;
        }
    }

    fn refresh_slot(&mut self, slot: usize) -> Result<()> {
        let a = self.beta[slot].exp();
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Divergence {
                step: self.steps,
                what: format!("step size exp({}) left (0, inf)", self.beta[slot]),
            });
        }
        self.alpha[slot] = a;
        Ok(())
    }

    fn refresh_touched_step_sizes(&mut self) -> Result<()> {
        match self.params.mode {
            StepSizeMode::Shared => self.refresh_slot(0),
            StepSizeMode::PerFeature => {
                for k in 0..self.touched.len() {
                    self.refresh_slot(self.touched[k])?;
                }
                Ok(())
            }
        }
    }

    fn refresh_all_step_sizes(&mut self) -> Result<()> {
        (0..self.beta.len()).try_for_each(|s| self.refresh_slot(s))
    }

    fn report(&self, delta: f64, effective_step_size: Option<f64>, normalization_applied: bool) -> StepReport {
        StepReport {
            delta,
            effective_step_size,
            step_sizes: self.alpha.clone(),
            normalization_applied,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(dim: usize, idx: &[usize]) -> SparseBinaryFeatures {
        SparseBinaryFeatures::new(dim, idx.iter().copied()).unwrap()
    }

    fn params(alpha0: f64, gamma: f64, lambda: f64, theta: f64) -> TdParams {
        TdParams {
            alpha0,
            gamma,
            lambda,
            theta,
            ..TdParams::default()
        }
    }

    #[test]
    fn one_td_step_from_zero_weights() {
        let mut td = TdLearner::new(TdAlgorithm::Td, 2, params(0.1, 0.5, 0.0, 0.0)).unwrap();
        let r = td.td_lambda_step(&features(2, &[0]), 1.0, &features(2, &[1])).unwrap();
        assert_eq!(r.delta, 1.0);
        assert!((td.weights()[0] - 0.1).abs() < 1e-15);
        assert_eq!(td.weights()[1], 0.0);
    }

    #[test]
    fn empty_features_only_decay_trace() {
        let mut td = TdLearner::new(TdAlgorithm::Td, 3, params(0.1, 0.9, 0.5, 0.0)).unwrap();
        td.step(&features(3, &[1]), 1.0, &features(3, &[2])).unwrap();
        let w_before = td.weights().to_vec();
        let z_before = td.eligibility_trace().to_vec();
        // With an empty φ the error is R plus the bootstrap of φ' (empty too).
        let r = td
            .step(&SparseBinaryFeatures::empty(3), 2.5, &SparseBinaryFeatures::empty(3))
            .unwrap();
        assert_eq!(r.delta, 2.5);
        // Only z moves; the trace is non-zero at index 1 so w moves there.
        assert_eq!(td.eligibility_trace()[1], z_before[1] * 0.45);
        assert_eq!(td.weights()[0], w_before[0]);
        assert_eq!(td.weights()[2], w_before[2]);
    }

    #[test]
    fn empty_features_with_no_trace_leave_weights() {
        let mut td = TdLearner::new(TdAlgorithm::Td, 2, params(0.1, 0.9, 0.0, 0.0)).unwrap();
        let r = td
            .step(&SparseBinaryFeatures::empty(2), 3.0, &SparseBinaryFeatures::empty(2))
            .unwrap();
        assert_eq!(r.delta, 3.0);
        assert_eq!(td.weights(), &[0.0, 0.0]);
    }

    #[test]
    fn dimension_mismatch_is_config_error() {
        let mut td = TdLearner::new(TdAlgorithm::TidbdSemi, 3, TdParams::default()).unwrap();
        let err = td.step(&features(2, &[0]), 0.0, &features(3, &[0])).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn non_finite_error_reports_step_index() {
        let mut td = TdLearner::new(TdAlgorithm::Td, 1, params(0.1, 0.9, 0.0, 0.0)).unwrap();
        let phi = features(1, &[0]);
        td.step(&phi, 1.0, &phi).unwrap();
        match td.step(&phi, f64::INFINITY, &phi) {
            Err(Error::Divergence { step, .. }) => assert_eq!(step, 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        let bad_tau = TdParams {
            tau: 0.0,
            ..TdParams::default()
        };
        assert!(TdLearner::new(TdAlgorithm::Autotidbd, 2, bad_tau.clone()).is_err());
        // τ is irrelevant to the other learners.
        assert!(TdLearner::new(TdAlgorithm::TidbdSemi, 2, bad_tau).is_ok());
        assert!(TdLearner::new(TdAlgorithm::Td, 2, params(0.1, 1.5, 0.0, 0.0)).is_err());
        assert!(TdLearner::new(TdAlgorithm::Td, 2, params(0.0, 0.5, 0.0, 0.0)).is_err());
        assert!(TdLearner::new(TdAlgorithm::Td, 0, TdParams::default()).is_err());
    }

    #[test]
    fn ordinary_meta_update_matches_semi_when_next_is_empty() {
        let p = params(0.2, 0.9, 0.0, 0.05);
        let mut semi = TdLearner::new(TdAlgorithm::TidbdSemi, 3, p.clone()).unwrap();
        let mut ord = TdLearner::new(TdAlgorithm::TidbdOrdinary, 3, p).unwrap();
        let phi = features(3, &[0, 2]);
        let empty = SparseBinaryFeatures::empty(3);
        for k in 0..20 {
            let r = 1.0 + (k % 3) as f64;
            semi.step(&phi, r, &empty).unwrap();
            ord.step(&phi, r, &empty).unwrap();
        }
        assert_eq!(semi.meta_weights(), ord.meta_weights());
        assert_eq!(semi.h_trace(), ord.h_trace());
        assert_eq!(semi.weights(), ord.weights());
    }

    #[test]
    fn large_meta_step_overflow_is_divergence() {
        let mut l = TdLearner::new(TdAlgorithm::TidbdOrdinary, 1, params(0.5, 0.0, 0.0, 1e6)).unwrap();
        let phi = features(1, &[0]);
        let empty = SparseBinaryFeatures::empty(1);
        let mut saw = None;
        for _ in 0..50 {
            if let Err(e) = l.step(&phi, 100.0, &empty) {
                saw = Some(e);
                break;
            }
        }
        assert!(saw.expect("expected divergence").is_divergence());
    }

    #[test]
    fn beta_clamp_bounds_meta_weights() {
        let mut p = params(0.5, 0.0, 0.0, 1e6);
        p.beta_clamp = Some(BetaClamp::new(-10.0, 0.0));
        let mut l = TdLearner::new(TdAlgorithm::TidbdOrdinary, 1, p).unwrap();
        let phi = features(1, &[0]);
        let empty = SparseBinaryFeatures::empty(1);
        for k in 0..50 {
            l.step(&phi, if k % 2 == 0 { 100.0 } else { -100.0 }, &empty).unwrap();
            assert!(l.meta_weights()[0] <= 0.0 && l.meta_weights()[0] >= -10.0);
        }
    }

    #[test]
    fn autotidbd_clamp_reports_normalization() {
        // Two active features at α=0.9 with γφ'=0: effective step size 1.8.
        let mut l = TdLearner::new(
            TdAlgorithm::Autotidbd,
            2,
            TdParams {
                alpha0: 0.9,
                gamma: 0.9,
                theta: 0.0,
                ..TdParams::default()
            },
        )
        .unwrap();
        let r = l
            .step(&features(2, &[0, 1]), 1.0, &SparseBinaryFeatures::empty(2))
            .unwrap();
        assert!(r.normalization_applied);
        assert!((r.effective_step_size.unwrap() - 1.0).abs() < 1e-12);
        assert!((r.step_sizes[0] - 0.5).abs() < 1e-12);
        let r = l
            .step(&features(2, &[0]), 1.0, &SparseBinaryFeatures::empty(2))
            .unwrap();
        assert!(!r.normalization_applied);
    }

    #[test]
    fn per_index_clamp_only_hits_overshooting_features() {
        let mut l = TdLearner::new(
            TdAlgorithm::Autotidbd,
            2,
            TdParams {
                alpha0: 0.9,
                gamma: 0.9,
                lambda: 1.0,
                m_clamp: MClamp::PerIndex,
                ..TdParams::default()
            },
        )
        .unwrap();
        let phi = features(2, &[0, 1]);
        let empty = SparseBinaryFeatures::empty(2);
        let r = l.step(&phi, 1.0, &empty).unwrap();
        // Each feature alone contributes 0.9 < 1.
        assert!(!r.normalization_applied);
        // Second step: z = 1.9 on both, each term 0.9·1.9 > 1.
        let r = l.step(&phi, 1.0, &empty).unwrap();
        assert!(r.normalization_applied);
        assert!((l.step_size(0) - 1.0 / 1.9).abs() < 1e-12);
    }

    #[test]
    fn shared_mode_single_feature_matches_per_feature() {
        for algorithm in [
            TdAlgorithm::TidbdSemi,
            TdAlgorithm::TidbdOrdinary,
            TdAlgorithm::Autotidbd,
        ] {
            let p = params(0.3, 0.8, 0.6, 0.05);
            let mut per = TdLearner::new(algorithm, 1, p.clone()).unwrap();
            let mut shared = TdLearner::new(
                algorithm,
                1,
                TdParams {
                    mode: StepSizeMode::Shared,
                    ..p
                },
            )
            .unwrap();
            let phi = features(1, &[0]);
            let empty = SparseBinaryFeatures::empty(1);
            for k in 0..100 {
                let next = if k % 4 == 3 { &empty } else { &phi };
                let r = (k % 5) as f64 - 1.5;
                per.step(&phi, r, next).unwrap();
                shared.step(&phi, r, next).unwrap();
            }
            assert_eq!(per.weights(), shared.weights(), "{algorithm}");
            assert_eq!(per.meta_weights(), shared.meta_weights(), "{algorithm}");
        }
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in TdAlgorithm::ALL {
            assert_eq!(a.name().parse::<TdAlgorithm>().unwrap(), a);
        }
        assert!("sarsa".parse::<TdAlgorithm>().is_err());
    }
}
