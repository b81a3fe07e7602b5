use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{run_baseline, Baseline};
use crate::error::{Error, Result};
use crate::model::{generate_channels, ScenarioConfig};
use crate::solver::{solve, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "n_s")]
    SurfaceElements,
    #[serde(rename = "p_th_mw")]
    HarvestThreshold,
    #[serde(rename = "er_center_x")]
    ErCenterX,
    #[serde(rename = "p_b_dbm")]
    PowerBudget,
}

impl Axis {
    fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            Axis::SurfaceElements => {
                if value < 0.0 || value.fract() != 0.0 {
                    return Err(Error::ConfigInvalid(format!("n_s value {value} is not a count")));
                }
                cfg.n_s = value as usize;
            }
            Axis::HarvestThreshold => cfg.p_th_mw = value,
            Axis::ErCenterX => cfg.er_center_x = value,
            Axis::PowerBudget => cfg.p_b_dbm = value,
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_baselines() -> Vec<Baseline> {
    vec![Baseline::RandomPhase, Baseline::NoIrs]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub base: ScenarioConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_baselines")]
    pub baselines: Vec<Baseline>,
    /// Wall-clock means are not reproducible, so they are only written when
    /// asked for; otherwise `mean_ms` is NaN.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::ConfigInvalid("sweep needs at least one value".into()));
        }
        if self.trials == 0 {
            return Err(Error::ConfigInvalid("sweep needs at least one trial".into()));
        }
        self.base.validate()?;
        self.solver.validate()?;
        for &v in &self.values {
            self.axis.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Seed of trial `trial`: first word of the ChaCha stream `trial` keyed by
/// the master seed. Independent of how many trials run or in which order.
pub fn child_seed(master: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

pub fn trial_rng(master: u64, trial: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(master, trial))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BaselineOutcome {
    pub which: Baseline,
    pub wsr_bits: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialRecord {
    pub value_index: usize,
    pub axis_value: f64,
    pub trial: usize,
    pub seed: u64,
    /// Fingerprint of the channels shared by the solver and every baseline.
    pub channel_hash: String,
    pub wsr_bits: f64,
    pub feasible: bool,
    pub wall_ms: f64,
    pub baselines: Vec<BaselineOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis_value: f64,
    pub mean_wsr_bits: f64,
    pub std_wsr_bits: f64,
    pub feas_rate: f64,
    pub mean_ms: f64,
    pub base_random_phase_bits: f64,
    pub base_no_irs_bits: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub trials: Vec<TrialRecord>,
}

fn run_trial(spec: &SweepSpec, value_index: usize, trial: usize) -> Result<TrialRecord> {
    let axis_value = spec.values[value_index];
    let cfg = spec.axis.apply(&spec.base, axis_value)?;
    // Trials are paired across axis values: trial t always uses the same seed.
    let seed = child_seed(spec.seed, trial);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ch = generate_channels(&cfg, &mut rng)?;
    let channel_hash = ch.fingerprint();
    let report = solve(&ch, &cfg, &spec.solver)?;
    let mut baselines = Vec::with_capacity(spec.baselines.len());
    for &which in &spec.baselines {
        let b = run_baseline(&ch, &cfg, &spec.solver, which, &mut rng)?;
        baselines.push(BaselineOutcome {
            which,
            wsr_bits: b.wsr_bits,
            feasible: b.feasible,
        });
    }
    debug_assert_eq!(channel_hash, ch.fingerprint());
    Ok(TrialRecord {
        value_index,
        axis_value,
        trial,
        seed,
        channel_hash,
        wsr_bits: report.wsr_bits,
        feasible: report.feasible,
        wall_ms: report.wall_time.as_secs_f64() * 1e3,
        baselines,
    })
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn sample_std(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

fn summarize(spec: &SweepSpec, value_index: usize, trials: &[TrialRecord]) -> SweepRow {
    let feasible: Vec<f64> = trials.iter().filter(|t| t.feasible).map(|t| t.wsr_bits).collect();
    let baseline_mean = |which: Baseline| {
        if !spec.baselines.contains(&which) {
            return f64::NAN;
        }
        let vals: Vec<f64> = trials
            .iter()
            .flat_map(|t| t.baselines.iter())
            .filter(|b| b.which == which && b.feasible)
            .map(|b| b.wsr_bits)
            .collect();
        mean(&vals)
    };
    SweepRow {
        axis_value: spec.values[value_index],
        mean_wsr_bits: mean(&feasible),
        std_wsr_bits: sample_std(&feasible),
        feas_rate: feasible.len() as f64 / trials.len() as f64,
        mean_ms: if spec.record_wall_time {
            mean(&trials.iter().map(|t| t.wall_ms).collect::<Vec<_>>())
        } else {
            f64::NAN
        },
        base_random_phase_bits: baseline_mean(Baseline::RandomPhase),
        base_no_irs_bits: baseline_mean(Baseline::NoIrs),
    }
}

/// Solves every (value, trial) pair in parallel and aggregates per value.
/// Infeasible trials are excluded from the WSR means and counted in the
/// feasibility rate.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let jobs: Vec<(usize, usize)> = (0..spec.values.len())
        .flat_map(|v| (0..spec.trials).map(move |t| (v, t)))
        .collect();
    let mut trials: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(v, t)| run_trial(spec, v, t))
        .collect::<Result<_>>()?;
    trials.sort_by_key(|t| (t.value_index, t.trial));
    let rows = (0..spec.values.len())
        .map(|v| {
            let group: Vec<TrialRecord> = trials.iter().filter(|t| t.value_index == v).cloned().collect();
            summarize(spec, v, &group)
        })
        .collect();
    Ok(SweepResult { rows, trials })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row).map_err(|e| Error::ConfigInvalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::ConfigInvalid(format!("csv: {e}")))?;
    Ok(())
}
