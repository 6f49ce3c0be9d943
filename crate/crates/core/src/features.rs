//! Feature construction: one-hot, hashed tile coding with an optional bias
//! unit, and noisy-feature injection.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{splitmix64, Rng};
use crate::sparse::SparseBinaryFeatures;

/// Tabular representation: exactly one active index.
pub fn one_hot(state_index: usize, n_states: usize) -> Result<SparseBinaryFeatures> {
    if state_index >= n_states {
        return Err(Error::config(format!(
            "state index {state_index} out of range for {n_states} states"
        )));
    }
    SparseBinaryFeatures::new(n_states, [state_index])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TileCoderConfig {
    /// Number of hashed tile indices; a power of two.
    pub memory_size: usize,
    pub n_tilings: usize,
    /// `(low, high)` per input dimension. Inputs are clamped into range.
    pub input_ranges: Vec<(f64, f64)>,
    /// Tiles across each dimension's range.
    pub tiles_per_dim: Vec<usize>,
    #[serde(default)]
    pub hashing_seed: u64,
    #[serde(default = "default_true")]
    pub append_bias: bool,
}

fn default_true() -> bool {
    true
}

impl TileCoderConfig {
    /// 2¹⁰ hashed features, 8 tilings, a bias unit and `tiles` tiles per
    /// dimension over the given ranges.
    pub fn standard(input_ranges: Vec<(f64, f64)>, tiles: usize) -> Self {
        let dims = input_ranges.len();
        TileCoderConfig {
            memory_size: 1 << 10,
            n_tilings: 8,
            input_ranges,
            tiles_per_dim: vec![tiles; dims],
            hashing_seed: 0,
            append_bias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.memory_size.is_power_of_two() {
            return Err(Error::config(format!(
                "tile memory_size must be a power of two, got {}",
                self.memory_size
            )));
        }
        if self.n_tilings == 0 || self.memory_size < self.n_tilings {
            return Err(Error::config(format!(
                "need 1 <= n_tilings <= memory_size, got {} tilings for {} slots",
                self.n_tilings, self.memory_size
            )));
        }
        if self.input_ranges.is_empty() {
            return Err(Error::config("tile coder needs at least one input dimension"));
        }
        if self.tiles_per_dim.len() != self.input_ranges.len() {
            return Err(Error::config(format!(
                "tiles_per_dim has {} entries for {} input ranges",
                self.tiles_per_dim.len(),
                self.input_ranges.len()
            )));
        }
        for (d, &(lo, hi)) in self.input_ranges.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::config(format!(
                    "input range {d} must satisfy low < high, got ({lo}, {hi})"
                )));
            }
        }
        if self.tiles_per_dim.contains(&0) {
            return Err(Error::config("tiles_per_dim entries must be positive"));
        }
        Ok(())
    }

    /// Total feature dimension, including the bias unit.
    pub fn dim(&self) -> usize {
        self.memory_size + usize::from(self.append_bias)
    }

    /// The bias unit is the last index.
    pub fn bias_index(&self) -> Option<usize> {
        self.append_bias.then_some(self.memory_size)
    }

    /// Active features per input: one per tiling plus the bias.
    pub fn active_count(&self) -> usize {
        self.n_tilings + usize::from(self.append_bias)
    }
}

/// Hashed tile coder.
///
/// Tiling `k` is shifted by `k / n_tilings` of a tile width along every
/// dimension. The memory is split into `n_tilings` equal blocks and tiling
/// `k` hashes its tile coordinates into block `k`, so different tilings never
/// share an index while tiles within one tiling may collide.
#[derive(Debug, Clone)]
pub struct TileCoder {
    cfg: TileCoderConfig,
    block: usize,
}

impl TileCoder {
    pub fn new(cfg: TileCoderConfig) -> Result<Self> {
        cfg.validate()?;
        let block = cfg.memory_size / cfg.n_tilings;
        Ok(TileCoder { cfg, block })
    }

    pub fn config(&self) -> &TileCoderConfig {
        &self.cfg
    }

    pub fn dim(&self) -> usize {
        self.cfg.dim()
    }

    pub fn encode(&self, inputs: &[f64]) -> Result<SparseBinaryFeatures> {
        let cfg = &self.cfg;
        if inputs.len() != cfg.input_ranges.len() {
            return Err(Error::DimensionMismatch {
                expected: cfg.input_ranges.len(),
                actual: inputs.len(),
            });
        }
        let scaled: Vec<f64> = inputs
            .iter()
            .zip(&cfg.input_ranges)
            .zip(&cfg.tiles_per_dim)
            .map(|((&x, &(lo, hi)), &tiles)| {
                let x = if x.is_nan() { lo } else { x.clamp(lo, hi) };
                (x - lo) / (hi - lo) * tiles as f64
            })
            .collect();

        let mut active = Vec::with_capacity(cfg.active_count());
        for k in 0..cfg.n_tilings {
            let offset = k as f64 / cfg.n_tilings as f64;
            let mut hash = splitmix64(cfg.hashing_seed ^ splitmix64(k as u64));
            for &s in &scaled {
                let coord = (s + offset).floor() as i64;
                hash = splitmix64(hash ^ coord as u64);
            }
            active.push(k * self.block + (hash % self.block as u64) as usize);
        }
        if let Some(bias) = cfg.bias_index() {
            active.push(bias);
        }
        SparseBinaryFeatures::new(cfg.dim(), active)
    }
}

/// Convenience wrapper around [`TileCoder::encode`].
pub fn tile_code(inputs: &[f64], cfg: &TileCoderConfig) -> Result<SparseBinaryFeatures> {
    TileCoder::new(cfg.clone())?.encode(inputs)
}

/// Features whose values are replaced by independent coin flips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseMask {
    pub noisy_indices: Vec<usize>,
    pub activation_prob: f64,
}

impl NoiseMask {
    pub fn new(mut noisy_indices: Vec<usize>, activation_prob: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&activation_prob) {
            return Err(Error::config(format!(
                "activation_prob must lie in [0, 1], got {activation_prob}"
            )));
        }
        noisy_indices.sort_unstable();
        noisy_indices.dedup();
        Ok(NoiseMask {
            noisy_indices,
            activation_prob,
        })
    }

    /// Picks `round(fraction · eligible)` distinct indices uniformly from
    /// `0..eligible`. Pass the memory size (not the full dimension) so the
    /// bias unit is never chosen.
    pub fn draw(eligible: usize, fraction: f64, activation_prob: f64, rng: &mut Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::config(format!(
                "noise fraction must lie in [0, 1], got {fraction}"
            )));
        }
        let count = (fraction * eligible as f64).round() as usize;
        let indices = sample(rng, eligible, count).into_vec();
        NoiseMask::new(indices, activation_prob)
    }

    pub fn validate(&self, dim: usize, bias: Option<usize>) -> Result<()> {
        if let Some(&bad) = self.noisy_indices.iter().find(|&&i| i >= dim) {
            return Err(Error::config(format!(
                "noisy index {bad} out of range for dimension {dim}"
            )));
        }
        if let Some(b) = bias {
            if self.contains(b) {
                return Err(Error::config("the bias unit cannot be a noisy feature"));
            }
        }
        Ok(())
    }

    pub fn contains(&self, index: usize) -> bool {
        self.noisy_indices.binary_search(&index).is_ok()
    }

    pub fn len(&self) -> usize {
        self.noisy_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.noisy_indices.is_empty()
    }
}

/// Replaces every masked index with a Bernoulli(`activation_prob`) draw;
/// other indices pass through. Draws happen in ascending index order.
pub fn inject_noise(phi: &SparseBinaryFeatures, mask: &NoiseMask, rng: &mut Rng) -> SparseBinaryFeatures {
    let mut active: Vec<usize> = phi.active().iter().copied().filter(|&i| !mask.contains(i)).collect();
    for &i in &mask.noisy_indices {
        if rng.random_bool(mask.activation_prob) {
            active.push(i);
        }
    }
    SparseBinaryFeatures::new(phi.dim(), active).expect("mask indices validated against dimension")
}
