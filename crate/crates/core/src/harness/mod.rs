//! Experiment configuration, sweeps and CSV output.
//!
//! Every random stream is derived from the configured seed plus a purpose
//! label and the trial number, so a run is fully determined by its manifest.

mod config;
mod output;
mod relevance;
mod sweep;

pub use config::{
    default_theta_grid, spaced_grid, Algorithm, ConfigFile, ExperimentConfig, ExperimentKind, GridSpacing,
    NoiseSettings, TileSettings,
};
pub use output::{write_manifest, write_relevance, write_sweep, OutputFiles, HEADER};
pub use relevance::{relevance_mask, run_relevance, RelevanceResult};
pub use sweep::{
    final_tenth_mean, first_tenth_mean, grid_cells, gridworld_trajectory, run_sweep, signal_trial, CellKey, CellResult,
    SignalTrial, SweepResult, RETURN_TAIL_TOLERANCE,
};
