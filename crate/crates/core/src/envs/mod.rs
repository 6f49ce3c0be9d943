//! Seeded environments.

mod gridworld;
mod mrp;
mod signal;

pub use gridworld::{Action, Cell, Gridworld, GridworldConfig, Teleport};
pub use mrp::{MrpSpec, Outcome};
pub use signal::{signal_stream, Regime, SignalSample, SignalStream, SignalStreamConfig, Sinusoid};
