use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cxmat::CVector;
use crate::error::Result;
use crate::model::{ChannelSet, ScenarioConfig};
use crate::solver::{solve_with, SolveOptions, SolveReport, SolverConfig};

/// Reference designs that optimize the covariances only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// Phases drawn uniformly on the torus and held fixed.
    RandomPhase,
    /// Reflected paths removed entirely.
    NoIrs,
}

/// Runs a baseline on the given channels. `rng` is only consumed by
/// [`Baseline::RandomPhase`].
pub fn run_baseline(
    ch: &ChannelSet,
    cfg: &ScenarioConfig,
    scfg: &SolverConfig,
    which: Baseline,
    rng: &mut impl Rng,
) -> Result<SolveReport> {
    match which {
        Baseline::RandomPhase => {
            let phi = CVector::from_fn(cfg.n_s, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI)));
            let opts = SolveOptions {
                initial_phi: Some(phi),
                optimize_phi: false,
            };
            solve_with(ch, cfg, scfg, &opts)
        }
        Baseline::NoIrs => {
            let opts = SolveOptions {
                initial_phi: None,
                optimize_phi: false,
            };
            solve_with(&ch.without_irs(), cfg, scfg, &opts)
        }
    }
}
