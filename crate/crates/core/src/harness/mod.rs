//! Experiment drivers: sweeps, baselines, gradient checks and timing.

mod baseline;
mod gradcheck;
mod sweep;
mod timing;

pub use baseline::{run_baseline, Baseline};
pub use gradcheck::{check_gradients, random_instance, GradCheckDims, GradCheckReport, Instance};
pub use sweep::{child_seed, run_sweep, trial_rng, write_sweep_csv, Axis, SweepResult, SweepRow, SweepSpec, TrialRecord};
pub use timing::{fit_exponent, timing_scan, TimingPoint, TimingReport};
