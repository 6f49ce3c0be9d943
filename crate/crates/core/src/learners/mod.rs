//! Linear learners with fixed or meta-learned step sizes.
//!
//! All step sizes are stored in the log domain (`β`, with `α = exp(β)`), so
//! they stay strictly positive. Each learner follows its update listing line
//! by line and computes the error from the weights as they were before the
//! step.

mod supervised;
mod td;

pub use supervised::{SupervisedAlgorithm, SupervisedLearner, SupervisedParams};
pub use td::{EtaRule, MClamp, StepSizeMode, TdAlgorithm, TdLearner, TdParams};

use serde::{Deserialize, Serialize};

use crate::sparse::SparseBinaryFeatures;

/// What a single update did, for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// TD or LMS error, computed from pre-update weights.
    pub delta: f64,
    /// Effective step size after normalisation. Only the AutoStep-style
    /// learners report it.
    pub effective_step_size: Option<f64>,
    /// `exp(β)` after the update: one entry per feature, or a single entry for
    /// a shared step size.
    pub step_sizes: Vec<f64>,
    /// Whether the effective step size exceeded one before normalisation.
    pub normalization_applied: bool,
}

/// Optional bounding of the meta-weights: each meta-update is limited to
/// `±max_update` and `β` itself is kept within `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaClamp {
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "BetaClamp::default_max_update")]
    pub max_update: f64,
}

impl BetaClamp {
    fn default_max_update() -> f64 {
        2.0
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        BetaClamp {
            lo,
            hi,
            max_update: Self::default_max_update(),
        }
    }

    pub(crate) fn validate(&self) -> crate::Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(crate::Error::config(format!(
                "beta clamp requires finite lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        if !(self.max_update > 0.0) {
            return Err(crate::Error::config("beta clamp max_update must be positive"));
        }
        Ok(())
    }

    #[inline]
    fn apply(clamp: Option<&BetaClamp>, beta: &mut f64, increment: f64) {
        match clamp {
            None => *beta += increment,
            Some(c) => {
                *beta = (*beta + increment.clamp(-c.max_update, c.max_update)).clamp(c.lo, c.hi);
            }
        }
    }
}

/// TD effective step size `−Σ_i α_i z_i (γφ'_i − φ_i)`: the fraction of the
/// current TD error removed by applying `w += αδz` and re-evaluating the same
/// transition.
pub fn effective_step_size(
    alpha: &[f64],
    z: &[f64],
    phi: &SparseBinaryFeatures,
    phi_next: &SparseBinaryFeatures,
    gamma: f64,
) -> f64 {
    assert_eq!(alpha.len(), z.len(), "alpha and trace lengths differ");
    effective_step_size_with(|i| alpha[i], z, phi, phi_next, gamma)
}

pub(crate) fn effective_step_size_with(
    alpha: impl Fn(usize) -> f64,
    z: &[f64],
    phi: &SparseBinaryFeatures,
    phi_next: &SparseBinaryFeatures,
    gamma: f64,
) -> f64 {
    let current: f64 = phi.active().iter().map(|&i| alpha(i) * z[i]).sum();
    let next: f64 = phi_next.active().iter().map(|&i| alpha(i) * z[i]).sum();
    current - gamma * next
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_active_feature() {
        let phi = SparseBinaryFeatures::new(2, [0]).unwrap();
        let next = SparseBinaryFeatures::new(2, [1]).unwrap();
        let ess = effective_step_size(&[0.1, 0.1], &[1.0, 0.0], &phi, &next, 0.9);
        assert!((ess - 0.1).abs() < 1e-15);
    }

    #[test]
    fn absorbing_next_state_reduces_to_supervised_form() {
        let phi = SparseBinaryFeatures::new(4, [0, 2, 3]).unwrap();
        let next = SparseBinaryFeatures::empty(4);
        let alpha = [0.1, 0.2, 0.3, 0.4];
        let z = phi.to_dense();
        let supervised: f64 = (0..4).map(|i| alpha[i] * z[i] * z[i]).sum();
        let ess = effective_step_size(&alpha, &z, &phi, &next, 0.7);
        assert!((ess - supervised).abs() < 1e-15);
    }

    #[test]
    fn beta_clamp_limits_update_and_range() {
        let c = BetaClamp::new(-5.0, 0.0);
        let mut b = -1.0;
        BetaClamp::apply(Some(&c), &mut b, 10.0);
        assert_eq!(b, 0.0);
        let mut b = -1.0;
        BetaClamp::apply(Some(&c), &mut b, -10.0);
        assert_eq!(b, -3.0);
        assert!(BetaClamp::new(1.0, 0.0).validate().is_err());
    }
}
