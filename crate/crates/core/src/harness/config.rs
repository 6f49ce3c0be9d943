use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::envs::{GridworldConfig, SignalStreamConfig};
use crate::error::{Error, Result};
use crate::features::{NoiseMask, TileCoderConfig};
use crate::learners::{
    BetaClamp, EtaRule, MClamp, StepSizeMode, SupervisedAlgorithm, SupervisedParams, TdAlgorithm, TdParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Gridworld,
    SignalPrediction,
    Relevance,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Gridworld => "gridworld",
            ExperimentKind::SignalPrediction => "signal-prediction",
            ExperimentKind::Relevance => "relevance",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gridworld" => Ok(ExperimentKind::Gridworld),
            "signal-prediction" => Ok(ExperimentKind::SignalPrediction),
            "relevance" => Ok(ExperimentKind::Relevance),
            _ => Err(Error::config(format!("unknown experiment `{s}`"))),
        }
    }
}

/// Every learner the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Td,
    Idbd,
    Autostep,
    TidbdSemi,
    TidbdOrdinary,
    Autotidbd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Td,
        Algorithm::Idbd,
        Algorithm::Autostep,
        Algorithm::TidbdSemi,
        Algorithm::TidbdOrdinary,
        Algorithm::Autotidbd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Td => "td",
            Algorithm::Idbd => "idbd",
            Algorithm::Autostep => "autostep",
            Algorithm::TidbdSemi => "tidbd-semi",
            Algorithm::TidbdOrdinary => "tidbd-ordinary",
            Algorithm::Autotidbd => "autotidbd",
        }
    }

    pub fn td(self) -> Option<TdAlgorithm> {
        match self {
            Algorithm::Td => Some(TdAlgorithm::Td),
            Algorithm::TidbdSemi => Some(TdAlgorithm::TidbdSemi),
            Algorithm::TidbdOrdinary => Some(TdAlgorithm::TidbdOrdinary),
            Algorithm::Autotidbd => Some(TdAlgorithm::Autotidbd),
            Algorithm::Idbd | Algorithm::Autostep => None,
        }
    }

    pub fn supervised(self) -> Option<SupervisedAlgorithm> {
        match self {
            Algorithm::Idbd => Some(SupervisedAlgorithm::Idbd),
            Algorithm::Autostep => Some(SupervisedAlgorithm::Autostep),
            _ => None,
        }
    }

    /// Whether θ has any effect on this learner.
    pub fn uses_theta(self) -> bool {
        !matches!(self, Algorithm::Td)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridSpacing {
    #[default]
    Log,
    Linear,
}

/// Tile coding of the signal stream's channels. Input ranges default to the
/// stream's own channel bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TileSettings {
    pub memory_size: usize,
    pub n_tilings: usize,
    pub tiles_per_dim: usize,
    pub hashing_seed: u64,
    pub append_bias: bool,
    pub input_ranges: Option<Vec<(f64, f64)>>,
}

impl Default for TileSettings {
    fn default() -> Self {
        TileSettings {
            memory_size: 1 << 10,
            n_tilings: 8,
            tiles_per_dim: 4,
            hashing_seed: 0,
            append_bias: true,
            input_ranges: None,
        }
    }
}

impl TileSettings {
    pub fn coder_config(&self, signal: &SignalStreamConfig) -> TileCoderConfig {
        let ranges = self.input_ranges.clone().unwrap_or_else(|| signal.channel_ranges());
        TileCoderConfig {
            memory_size: self.memory_size,
            n_tilings: self.n_tilings,
            tiles_per_dim: vec![self.tiles_per_dim; ranges.len()],
            input_ranges: ranges,
            hashing_seed: self.hashing_seed,
            append_bias: self.append_bias,
        }
    }
}

/// How the relevance experiment picks its noisy features: either an explicit
/// index list or a seeded random fraction of the non-bias features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSettings {
    pub fraction: f64,
    pub activation_prob: f64,
    pub indices: Option<Vec<usize>>,
}

impl Default for NoiseSettings {
    fn default() -> Self {
        NoiseSettings {
            fraction: 0.25,
            activation_prob: 0.5,
            indices: None,
        }
    }
}

/// On-disk configuration. Every field is optional; missing ones take the
/// defaults of the chosen experiment. The same layout is written back as the
/// run manifest with every field filled in.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<ExperimentKind>,
    pub algorithm: Option<Algorithm>,
    pub alpha0_grid: Option<Vec<f64>>,
    /// `(low, high)` for a generated α₀ grid when `alpha0_grid` is absent.
    pub alpha0_range: Option<(f64, f64)>,
    pub alpha0_points: Option<usize>,
    pub alpha0_spacing: Option<GridSpacing>,
    pub theta_grid: Option<Vec<f64>>,
    pub lambda_grid: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    pub steps: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub step_size_mode: Option<StepSizeMode>,
    pub tau: Option<f64>,
    pub td_baseline: Option<bool>,
    pub log_interval: Option<usize>,
    pub m_clamp: Option<MClamp>,
    pub eta_rule: Option<EtaRule>,
    pub beta_clamp: Option<BetaClamp>,
    pub output_dir: Option<PathBuf>,
    pub code_version: Option<String>,
    pub gridworld: Option<GridworldConfig>,
    pub signal: Option<SignalStreamConfig>,
    pub tiles: Option<TileSettings>,
    pub noise: Option<NoiseSettings>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigFile::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn resolve(self) -> Result<ExperimentConfig> {
        ExperimentConfig::resolve(self)
    }
}

/// Fully specified experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub algorithm: Algorithm,
    pub alpha0_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub gamma: f64,
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub step_size_mode: StepSizeMode,
    pub tau: f64,
    /// Also run fixed-step TD at every α₀ (and λ) of the grid.
    pub td_baseline: bool,
    pub log_interval: usize,
    pub m_clamp: MClamp,
    pub eta_rule: EtaRule,
    pub beta_clamp: Option<BetaClamp>,
    pub output_dir: PathBuf,
    pub gridworld: GridworldConfig,
    pub signal: SignalStreamConfig,
    pub tiles: TileSettings,
    pub noise: NoiseSettings,
}

/// `lo · (hi/lo)^{k/(n−1)}` or evenly spaced points.
pub fn spaced_grid(lo: f64, hi: f64, points: usize, spacing: GridSpacing) -> Vec<f64> {
    if points <= 1 {
        return vec![lo];
    }
    let last = (points - 1) as f64;
    (0..points)
        .map(|k| {
            let f = k as f64 / last;
            match spacing {
                _ if k == 0 => lo,
                _ if k == points - 1 => hi,
                GridSpacing::Log => lo * (hi / lo).powf(f),
                GridSpacing::Linear => lo + f * (hi - lo),
            }
        })
        .collect()
}

/// θ = 0 followed by 0.01·k for k = 1..=20.
pub fn default_theta_grid() -> Vec<f64> {
    (0..=20).map(|k| k as f64 / 100.0).collect()
}

impl ExperimentConfig {
    pub fn resolve(file: ConfigFile) -> Result<Self> {
        let experiment = file
            .experiment
            .ok_or_else(|| Error::config("missing field `experiment`"))?;
        let algorithm = match (file.algorithm, experiment) {
            (Some(a), _) => a,
            // The only learner the relevance experiment supports.
            (None, ExperimentKind::Relevance) => Algorithm::Autotidbd,
            (None, _) => return Err(Error::config("missing field `algorithm`")),
        };
        let gridworld_like = experiment == ExperimentKind::Gridworld;

        let alpha0_grid = match file.alpha0_grid {
            Some(g) => g,
            None if gridworld_like => {
                let (lo, hi) = file.alpha0_range.unwrap_or((0.0005, 0.5));
                spaced_grid(
                    lo,
                    hi,
                    file.alpha0_points.unwrap_or(7),
                    file.alpha0_spacing.unwrap_or_default(),
                )
            }
            None => match file.alpha0_range {
                Some((lo, hi)) => spaced_grid(
                    lo,
                    hi,
                    file.alpha0_points.unwrap_or(7),
                    file.alpha0_spacing.unwrap_or_default(),
                ),
                None => vec![1.0 / 9.0],
            },
        };
        let theta_grid = file.theta_grid.unwrap_or_else(|| match experiment {
            ExperimentKind::Gridworld => default_theta_grid(),
            ExperimentKind::SignalPrediction => vec![1e-4, 1e-3, 1e-2],
            ExperimentKind::Relevance => vec![1e-2],
        });
        let lambda_grid = file.lambda_grid.unwrap_or_else(|| match experiment {
            ExperimentKind::Gridworld => vec![0.0],
            ExperimentKind::SignalPrediction => vec![0.0, 0.3, 0.6, 0.9],
            ExperimentKind::Relevance => vec![0.95],
        });
        let cfg = ExperimentConfig {
            experiment,
            algorithm,
            alpha0_grid,
            theta_grid,
            lambda_grid,
            gamma: file.gamma.unwrap_or(if gridworld_like { 0.99 } else { 0.95 }),
            steps: file.steps.unwrap_or(if gridworld_like { 15_000 } else { 20_000 }),
            trials: file.trials.unwrap_or(match experiment {
                ExperimentKind::Gridworld => 30,
                ExperimentKind::SignalPrediction => 5,
                ExperimentKind::Relevance => 10,
            }),
            seed: file.seed.unwrap_or(0),
            step_size_mode: file.step_size_mode.unwrap_or(if gridworld_like {
                StepSizeMode::Shared
            } else {
                StepSizeMode::PerFeature
            }),
            tau: file.tau.unwrap_or(1e4),
            td_baseline: file.td_baseline.unwrap_or(gridworld_like),
            log_interval: file.log_interval.unwrap_or(match experiment {
                ExperimentKind::Relevance => 200,
                _ => 50,
            }),
            m_clamp: file.m_clamp.unwrap_or_default(),
            eta_rule: file.eta_rule.unwrap_or_default(),
            beta_clamp: file.beta_clamp,
            output_dir: file
                .output_dir
                .or_else(|| std::env::var_os("MTD_OUT_DIR").map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out")),
            gridworld: file.gridworld.unwrap_or_default(),
            signal: file.signal.unwrap_or_default(),
            tiles: file.tiles.unwrap_or_default(),
            noise: file.noise.unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        fn grid(name: &str, g: &[f64], ok: impl Fn(f64) -> bool, rule: &str) -> Result<()> {
            if g.is_empty() {
                return Err(Error::config(format!("`{name}` must not be empty")));
            }
            if let Some(bad) = g.iter().find(|&&x| !x.is_finite() || !ok(x)) {
                return Err(Error::config(format!("`{name}` entries must be {rule}, got {bad}")));
            }
            Ok(())
        }
        grid("alpha0_grid", &self.alpha0_grid, |x| x > 0.0, "positive")?;
        grid("theta_grid", &self.theta_grid, |x| x >= 0.0, "non-negative")?;
        grid(
            "lambda_grid",
            &self.lambda_grid,
            |x| (0.0..=1.0).contains(&x),
            "in [0, 1]",
        )?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!("`gamma` must lie in [0, 1], got {}", self.gamma)));
        }
        if self.steps == 0 {
            return Err(Error::config("`steps` must be positive"));
        }
        if self.trials == 0 {
            return Err(Error::config("`trials` must be positive"));
        }
        if self.log_interval == 0 {
            return Err(Error::config("`log_interval` must be positive"));
        }
        if !(self.tau > 0.0) {
            return Err(Error::config(format!("`tau` must be positive, got {}", self.tau)));
        }
        if let Some(c) = &self.beta_clamp {
            c.validate()?;
        }
        match self.experiment {
            ExperimentKind::Gridworld => {
                self.gridworld.validate()?;
                if self.algorithm.td().is_none() {
                    return Err(Error::config(format!(
                        "`{}` is a supervised learner; the gridworld experiment needs a TD learner",
                        self.algorithm
                    )));
                }
                if self.gamma >= 1.0 {
                    return Err(Error::config(
                        "the gridworld experiment needs gamma < 1 for exact values",
                    ));
                }
            }
            ExperimentKind::SignalPrediction | ExperimentKind::Relevance => {
                self.signal.validate()?;
                self.tiles.coder_config(&self.signal).validate()?;
                if let Some(r) = &self.tiles.input_ranges {
                    if r.len() != self.signal.n_channels() {
                        return Err(Error::config(format!(
                            "tiles.input_ranges has {} entries for {} signal channels",
                            r.len(),
                            self.signal.n_channels()
                        )));
                    }
                }
            }
        }
        if self.experiment == ExperimentKind::Relevance {
            if self.algorithm != Algorithm::Autotidbd {
                return Err(Error::config("the relevance experiment runs `autotidbd` only"));
            }
            if self.step_size_mode != StepSizeMode::PerFeature {
                return Err(Error::config("the relevance experiment needs per-feature step sizes"));
            }
            let coder = self.tiles.coder_config(&self.signal);
            self.noise_mask_template()?.validate(coder.dim(), coder.bias_index())?;
        }
        Ok(())
    }

    /// The explicit mask, or an empty placeholder carrying the activation
    /// probability when the mask is drawn at run time.
    fn noise_mask_template(&self) -> Result<NoiseMask> {
        if !(0.0..=1.0).contains(&self.noise.fraction) {
            return Err(Error::config(format!(
                "noise fraction must lie in [0, 1], got {}",
                self.noise.fraction
            )));
        }
        NoiseMask::new(
            self.noise.indices.clone().unwrap_or_default(),
            self.noise.activation_prob,
        )
    }

    pub fn td_params(&self, alpha0: f64, theta: f64, lambda: f64) -> TdParams {
        TdParams {
            gamma: self.gamma,
            lambda,
            theta,
            tau: self.tau,
            alpha0,
            mode: self.step_size_mode,
            clip_h: true,
            m_clamp: self.m_clamp,
            eta_rule: self.eta_rule,
            beta_clamp: self.beta_clamp,
        }
    }

    pub fn supervised_params(&self, alpha0: f64, theta: f64) -> SupervisedParams {
        SupervisedParams {
            theta,
            tau: self.tau,
            alpha0,
            clip_h: true,
            beta_clamp: self.beta_clamp,
        }
    }

    /// The configuration as a complete file, suitable as a run manifest.
    pub fn to_file(&self) -> ConfigFile {
        ConfigFile {
            experiment: Some(self.experiment),
            algorithm: Some(self.algorithm),
            alpha0_grid: Some(self.alpha0_grid.clone()),
            alpha0_range: None,
            alpha0_points: None,
            alpha0_spacing: None,
            theta_grid: Some(self.theta_grid.clone()),
            lambda_grid: Some(self.lambda_grid.clone()),
            gamma: Some(self.gamma),
            steps: Some(self.steps),
            trials: Some(self.trials),
            seed: Some(self.seed),
            step_size_mode: Some(self.step_size_mode),
            tau: Some(self.tau),
            td_baseline: Some(self.td_baseline),
            log_interval: Some(self.log_interval),
            m_clamp: Some(self.m_clamp),
            eta_rule: Some(self.eta_rule),
            beta_clamp: self.beta_clamp,
            output_dir: Some(self.output_dir.clone()),
            code_version: Some(env!("CARGO_PKG_VERSION").to_string()),
            gridworld: Some(self.gridworld.clone()),
            signal: Some(self.signal.clone()),
            tiles: Some(self.tiles.clone()),
            noise: Some(self.noise.clone()),
        }
    }

    pub fn manifest(&self) -> Result<String> {
        toml::to_string(&self.to_file()).map_err(|e| Error::config(format!("cannot serialise manifest: {e}")))
    }
}
