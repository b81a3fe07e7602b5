//! Weighted sum rate maximization for IRS-assisted SWIPT-MIMO broadcasting.
//!
//! The solver alternates projected gradient ascent steps on the transmit
//! covariances and the surface phases inside a penalty dual decomposition
//! loop that enforces the energy-harvesting constraint. The [`harness`]
//! module wraps it in Monte Carlo sweeps, baselines and diagnostics.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cxmat;
pub mod error;
pub mod gradients;
pub mod harness;
pub mod model;
pub mod objective;
pub mod projections;
pub mod solver;

pub use error::{Error, Result};
pub use model::{ChannelSet, EffectiveChannels, ScenarioConfig};
pub use objective::{DesignPoint, PenaltyState};
pub use solver::{solve, SolveReport, SolverConfig};
