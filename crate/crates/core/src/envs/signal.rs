use std::f64::consts::TAU;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sinusoid {
    pub amplitude: f64,
    /// In steps.
    pub period: f64,
    /// In radians.
    pub phase: f64,
}

/// From `start` onwards every amplitude is multiplied by `amplitude_scale`
/// and every period by `period_scale` (relative to the base components).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub start: usize,
    pub amplitude_scale: f64,
    pub period_scale: f64,
}

/// A sum of sinusoids with piecewise-constant regime changes, observed
/// through a noisy position channel and noisy derivative channels.
///
/// Channel 0 is the signal of interest. Auxiliary channel 0 is its scaled
/// one-step difference (a velocity); auxiliary channel `j ≥ 1` is the scaled
/// difference `j` steps ahead, standing in for a control signal that leads
/// the motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignalStreamConfig {
    pub horizon: usize,
    pub components: Vec<Sinusoid>,
    pub noise_std: f64,
    #[serde(default)]
    pub regimes: Vec<Regime>,
    #[serde(default)]
    pub n_aux_channels: usize,
    #[serde(default = "default_derivative_gain")]
    pub derivative_gain: f64,
}

fn default_derivative_gain() -> f64 {
    100.0
}

impl Default for SignalStreamConfig {
    fn default() -> Self {
        SignalStreamConfig {
            horizon: 20_000,
            components: vec![
                Sinusoid {
                    amplitude: 1.0,
                    period: 600.0,
                    phase: 0.0,
                },
                Sinusoid {
                    amplitude: 0.5,
                    period: 130.0,
                    phase: 1.3,
                },
                Sinusoid {
                    amplitude: 0.2,
                    period: 37.0,
                    phase: 0.4,
                },
            ],
            noise_std: 0.02,
            regimes: vec![
                Regime {
                    start: 7_000,
                    amplitude_scale: 1.5,
                    period_scale: 0.6,
                },
                Regime {
                    start: 14_000,
                    amplitude_scale: 0.8,
                    period_scale: 1.3,
                },
            ],
            n_aux_channels: 2,
            derivative_gain: default_derivative_gain(),
        }
    }
}

impl SignalStreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("signal horizon must be positive"));
        }
        if self.components.is_empty() {
            return Err(Error::config("signal needs at least one sinusoid"));
        }
        for (k, c) in self.components.iter().enumerate() {
            if !(c.period > 0.0) || !c.amplitude.is_finite() || !c.phase.is_finite() {
                return Err(Error::config(format!(
                    "sinusoid {k} needs a positive period and finite amplitude/phase"
                )));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config(format!(
                "noise_std must be non-negative, got {}",
                self.noise_std
            )));
        }
        for (k, r) in self.regimes.iter().enumerate() {
            if !(r.period_scale > 0.0) || !r.amplitude_scale.is_finite() {
                return Err(Error::config(format!("regime {k} needs a positive period scale")));
            }
            if k > 0 && r.start <= self.regimes[k - 1].start {
                return Err(Error::config("regime boundaries must be strictly increasing"));
            }
        }
        if !self.derivative_gain.is_finite() {
            return Err(Error::config("derivative_gain must be finite"));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        1 + self.n_aux_channels
    }

    fn scales_at(&self, t: usize) -> (f64, f64) {
        self.regimes
            .iter()
            .rev()
            .find(|r| r.start <= t)
            .map_or((1.0, 1.0), |r| (r.amplitude_scale, r.period_scale))
    }

    /// Generous per-channel `(low, high)` bounds, suitable as tile-coder
    /// ranges. Values outside are possible only through noise tails or the
    /// jump at a regime boundary, and are clamped by the coder.
    pub fn channel_ranges(&self) -> Vec<(f64, f64)> {
        let max_amp = self.regimes.iter().map(|r| r.amplitude_scale.abs()).fold(1.0, f64::max);
        let min_pscale = self.regimes.iter().map(|r| r.period_scale).fold(1.0, f64::min);
        let slack = 4.0 * self.noise_std;
        let position = max_amp * self.components.iter().map(|c| c.amplitude.abs()).sum::<f64>() + slack;
        let velocity = self.derivative_gain.abs()
            * max_amp
            * self
                .components
                .iter()
                .map(|c| c.amplitude.abs() * TAU / (c.period * min_pscale))
                .sum::<f64>()
            + slack;
        let mut ranges = vec![(-position, position)];
        ranges.extend(std::iter::repeat_n((-velocity, velocity), self.n_aux_channels));
        ranges
    }

    /// Noise-free signal for steps `0..len`.
    pub fn clean_series(&self, len: usize) -> Vec<f64> {
        let mut phases: Vec<f64> = self.components.iter().map(|c| c.phase).collect();
        let mut out = Vec::with_capacity(len);
        for t in 0..len {
            let (amp, pscale) = self.scales_at(t);
            let value: f64 = self
                .components
                .iter()
                .zip(&phases)
                .map(|(c, &ph)| c.amplitude * ph.sin())
                .sum();
            out.push(amp * value);
            for (ph, c) in phases.iter_mut().zip(&self.components) {
                *ph += TAU / (c.period * pscale);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSample {
    pub inputs: Vec<f64>,
    pub signal: f64,
}

/// Iterator over `horizon` samples; deterministic given the generator.
pub struct SignalStream {
    cfg: SignalStreamConfig,
    clean: Vec<f64>,
    noise: Option<Normal<f64>>,
    rng: Rng,
    t: usize,
}

impl SignalStream {
    pub fn new(cfg: SignalStreamConfig, rng: Rng) -> Result<Self> {
        cfg.validate()?;
        let clean = cfg.clean_series(cfg.horizon + cfg.n_aux_channels + 1);
        let noise = (cfg.noise_std > 0.0).then(|| Normal::new(0.0, cfg.noise_std).expect("validated noise_std"));
        Ok(SignalStream {
            cfg,
            clean,
            noise,
            rng,
            t: 0,
        })
    }

    fn noise(&mut self) -> f64 {
        match &self.noise {
            Some(n) => n.sample(&mut self.rng),
            None => 0.0,
        }
    }
}

impl Iterator for SignalStream {
    type Item = SignalSample;

    fn next(&mut self) -> Option<SignalSample> {
        let t = self.t;
        if t >= self.cfg.horizon {
            return None;
        }
        self.t += 1;
        let signal = self.clean[t] + self.noise();
        let mut inputs = Vec::with_capacity(self.cfg.n_channels());
        inputs.push(signal);
        let gain = self.cfg.derivative_gain;
        for j in 0..self.cfg.n_aux_channels {
            let ahead = t + j;
            let diff = if ahead == 0 {
                0.0
            } else {
                self.clean[ahead] - self.clean[ahead - 1]
            };
            let value = gain * diff + self.noise();
            inputs.push(value);
        }
        Some(SignalSample { inputs, signal })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.cfg.horizon - self.t;
        (left, Some(left))
    }
}

/// Builds the stream for a configuration and generator.
pub fn signal_stream(cfg: SignalStreamConfig, rng: Rng) -> Result<SignalStream> {
    SignalStream::new(cfg, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn pure(amplitude: f64) -> SignalStreamConfig {
        SignalStreamConfig {
            horizon: 10_000,
            components: vec![Sinusoid {
                amplitude,
                period: 100.0,
                phase: 0.3,
            }],
            noise_std: 0.0,
            regimes: vec![],
            n_aux_channels: 2,
            derivative_gain: 100.0,
        }
    }

    #[test]
    fn pure_sinusoid_is_bounded() {
        let s = SignalStream::new(pure(1.0), stream(1, &[])).unwrap();
        for sample in s {
            assert!(sample.signal.abs() <= 1.0);
            assert_eq!(sample.inputs[0], sample.signal);
            assert_eq!(sample.inputs.len(), 3);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let cfg = SignalStreamConfig::default();
        let a: Vec<_> = SignalStream::new(cfg.clone(), stream(5, &[2])).unwrap().collect();
        let b: Vec<_> = SignalStream::new(cfg.clone(), stream(5, &[2])).unwrap().collect();
        assert_eq!(a, b);
        let c: Vec<_> = SignalStream::new(cfg, stream(6, &[2])).unwrap().take(10).collect();
        assert_ne!(a[..10], c[..]);
    }

    #[test]
    fn regime_change_scales_variance() {
        let mut cfg = pure(1.0);
        cfg.regimes = vec![Regime {
            start: 5000,
            amplitude_scale: 2.0,
            period_scale: 1.0,
        }];
        let xs: Vec<f64> = SignalStream::new(cfg, stream(0, &[]))
            .unwrap()
            .map(|s| s.signal)
            .collect();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
        };
        let ratio = var(&xs[6000..10000]) / var(&xs[0..5000]);
        assert!((ratio / 4.0 - 1.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn ranges_cover_clean_signal() {
        let cfg = SignalStreamConfig {
            noise_std: 0.0,
            ..SignalStreamConfig::default()
        };
        let ranges = cfg.channel_ranges();
        let samples: Vec<_> = SignalStream::new(cfg.clone(), stream(0, &[])).unwrap().collect();
        for s in &samples {
            assert!(s.inputs[0].abs() <= ranges[0].1);
        }
        let inside = samples
            .iter()
            .filter(|s| s.inputs[1..].iter().zip(&ranges[1..]).all(|(x, r)| x.abs() <= r.1))
            .count();
        // Only the two regime jumps may exceed the smooth derivative bound.
        assert!(samples.len() - inside <= 2 * cfg.n_aux_channels);
    }

    #[test]
    fn validation() {
        let mut cfg = SignalStreamConfig::default();
        cfg.regimes[1].start = cfg.regimes[0].start;
        assert!(cfg.validate().is_err());
        let cfg = SignalStreamConfig {
            horizon: 0,
            ..SignalStreamConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = SignalStreamConfig {
            noise_std: -1.0,
            ..SignalStreamConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
