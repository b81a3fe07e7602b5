//! Euclidean projections onto the power-budget set and the unit-modulus torus.

use num_complex::Complex64;

use crate::cxmat::{herm_eig, CMatrix, CVector, HermEig};
use crate::error::{Error, Result};

/// Water level `ν ≥ 0` with `Σ max(λ_i − ν, 0) = budget`, or `0` when the
/// clamped eigenvalues already fit the budget.
pub fn water_level(lambda: &[f64], budget: f64) -> f64 {
    let positive: f64 = lambda.iter().map(|&l| l.max(0.0)).sum();
    if positive <= budget {
        return 0.0;
    }
    let mut sorted: Vec<f64> = lambda.iter().copied().filter(|&l| l > 0.0).collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    // With the k largest values active, ν = (Σ_{i<k} λ_i − budget) / k; the
    // right k is the last one whose level stays below λ_{k-1}.
    let mut prefix = 0.0;
    let mut level = 0.0;
    for (k, &l) in sorted.iter().enumerate() {
        prefix += l;
        let candidate = (prefix - budget) / (k + 1) as f64;
        if candidate >= l {
            break;
        }
        level = candidate;
    }
    level.max(0.0)
}

/// Projects the covariance blocks onto `{X_m ⪰ 0, Σ_m tr X_m ≤ p_b}`.
///
/// The blocks share one budget, so all eigenvalues are water-filled jointly.
pub fn project_covariances(x: &[CMatrix], p_b: f64) -> Result<Vec<CMatrix>> {
    if !(p_b > 0.0) {
        return Err(Error::ConfigInvalid("power budget must be positive".into()));
    }
    let eigs: Vec<HermEig> = x.iter().map(herm_eig).collect::<Result<_>>()?;
    let all: Vec<f64> = eigs.iter().flat_map(|e| e.eigenvalues.iter().copied()).collect();
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    let total: f64 = all.iter().sum();
    if min >= 0.0 && total <= p_b {
        return Ok(x.to_vec());
    }
    let nu = water_level(&all, p_b);
    // With eigenvalues far above the budget, λ − ν cancels badly; pull the
    // rounded result back onto the budget.
    let poured: f64 = all.iter().map(|&l| (l - nu).max(0.0)).sum();
    let scale = if poured > p_b { p_b / poured } else { 1.0 };
    Ok(eigs.iter().map(|e| e.rebuild_with(|l| scale * (l - nu).max(0.0))).collect())
}

/// Radial projection onto `|φ_n| = 1`; zero entries map to `1`.
pub fn project_phases(phi: &CVector) -> CVector {
    phi.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}
