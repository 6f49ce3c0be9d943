//! Meta-descent step-size adaptation for linear temporal-difference learning.
//!
//! The crate is organised around five pieces:
//!
//! - [`learners`]: TD(λ), IDBD, AutoStep and the three TD generalisations of
//!   IDBD (semi-gradient TIDBD, ordinary-gradient TIDBD, AutoTIDBD). Every
//!   learner exposes a deterministic single-step update.
//! - [`envs`]: the 5×5 gridworld Markov reward process and a seeded synthetic
//!   nonstationary signal stream.
//! - [`features`]: one-hot, hashed tile coding with a bias unit, and noisy
//!   feature injection.
//! - [`eval`]: exact value solves, RMSE, return error and step-size relevance
//!   reports.
//! - [`harness`]: experiment configuration, parameter sweeps and CSV output.

// NaN must fail validation, and index loops read closer to the update rules.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod envs;
pub mod error;
pub mod eval;
pub mod features;
pub mod harness;
pub mod learners;
pub mod rng;
pub mod sparse;

pub use error::{Error, Result};
pub use sparse::{predict, SparseBinaryFeatures};
