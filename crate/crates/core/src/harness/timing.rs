use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{generate_channels, ScenarioConfig};
use crate::solver::{solve, SolverConfig};

/// Timed solves per channel draw.
const REPEATS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingPoint {
    pub n_s: usize,
    /// Mean wall time per inner iteration, in microseconds.
    pub us_per_iteration: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub points: Vec<TimingPoint>,
    /// Least-squares slope of log(time) against log(n_s).
    pub exponent: f64,
}

/// Slope `b` of the least-squares line through `(ln x, ln y)`.
pub fn fit_exponent(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints(format!("{} point(s)", points.len())));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientPoints("all abscissae coincide".into()));
    }
    Ok(sxy / sxx)
}

/// Mean time per inner iteration for each surface size, pooled over
/// `seeds` channel realizations of `base`.
pub fn timing_scan(n_s_values: &[usize], base: &ScenarioConfig, scfg: &SolverConfig, seeds: usize) -> Result<TimingReport> {
    if n_s_values.len() < 3 {
        return Err(Error::InsufficientPoints(format!(
            "need at least 3 surface sizes, got {}",
            n_s_values.len()
        )));
    }
    let lo = *n_s_values.iter().min().unwrap_or(&0);
    let hi = *n_s_values.iter().max().unwrap_or(&0);
    if lo == 0 || hi < 4 * lo {
        return Err(Error::InsufficientPoints("surface sizes must span at least a factor of 4".into()));
    }
    let seeds = seeds.max(1);
    let mut cases = Vec::with_capacity(n_s_values.len() * seeds);
    for &n_s in n_s_values {
        let cfg = ScenarioConfig { n_s, ..base.clone() };
        for seed in 0..seeds {
            let ch = generate_channels(&cfg, &mut ChaCha8Rng::seed_from_u64(seed as u64))?;
            cases.push((cfg.clone(), ch));
        }
    }
    // Rounds sweep every case in turn so slow drift in machine load hits all
    // sizes alike; the fastest round of each case is kept.
    let mut best = vec![f64::INFINITY; cases.len()];
    let mut inner = vec![0; cases.len()];
    for _ in 0..REPEATS {
        for (i, (cfg, ch)) in cases.iter().enumerate() {
            let report = solve(ch, cfg, scfg)?;
            best[i] = best[i].min(report.wall_time.as_secs_f64());
            inner[i] = report.inner_iterations;
        }
    }
    let points: Vec<TimingPoint> = n_s_values
        .iter()
        .enumerate()
        .map(|(v, &n_s)| {
            let range = v * seeds..(v + 1) * seeds;
            let secs: f64 = best[range.clone()].iter().sum();
            let iterations: usize = inner[range].iter().sum();
            TimingPoint {
                n_s,
                us_per_iteration: secs * 1e6 / iterations.max(1) as f64,
                iterations,
            }
        })
        .collect();
    let exponent = fit_exponent(&points.iter().map(|p| (p.n_s as f64, p.us_per_iteration)).collect::<Vec<_>>())?;
    Ok(TimingReport { points, exponent })
}
