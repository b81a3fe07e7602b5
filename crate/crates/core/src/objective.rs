//! Rates, harvested power and the augmented Lagrangian.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cxmat::{logdet_psd, CMatrix, CVector};
use crate::error::{Error, Result};
use crate::model::{EffectiveChannels, ScenarioConfig};

/// Optimization state: one transmit covariance per IR, the surface phases
/// and the harvest slack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignPoint {
    #[serde(with = "wire::matrices")]
    pub x: Vec<CMatrix>,
    #[serde(with = "wire::vector")]
    pub phi: CVector,
    pub tau: f64,
}

impl DesignPoint {
    /// `X = 0`, `φ = 1`, `τ = 0`.
    pub fn initial(n_b: usize, n_s: usize, m_i: usize) -> Self {
        Self {
            x: vec![CMatrix::zeros(n_b, n_b); m_i],
            phi: CVector::from_element(n_s, Complex64::new(1.0, 0.0)),
            tau: 0.0,
        }
    }

    /// `Σ = Σ_k X_k`.
    pub fn sigma(&self) -> CMatrix {
        self.sigma_without(&[])
    }

    /// Sum of every block except the listed ones.
    pub fn sigma_without(&self, skip: &[usize]) -> CMatrix {
        let n = self.x[0].nrows();
        let mut acc = CMatrix::zeros(n, n);
        for (k, xk) in self.x.iter().enumerate() {
            if !skip.contains(&k) {
                acc += xk;
            }
        }
        acc
    }

    pub fn total_power(&self) -> f64 {
        self.x.iter().map(|x| x.trace().re).sum()
    }
}

/// Multiplier and penalty parameter of the augmented Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyState {
    pub mu: f64,
    pub rho: f64,
}

fn check_point(eff: &EffectiveChannels, d: &DesignPoint) -> Result<()> {
    if d.x.len() != eff.z.len() || d.x.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} covariance blocks for {} receivers",
            d.x.len(),
            eff.z.len()
        )));
    }
    Ok(())
}

/// `I + Z S Zᴴ`.
pub(crate) fn i_plus_quad(z: &CMatrix, s: &CMatrix) -> CMatrix {
    let n = z.nrows();
    CMatrix::identity(n, n) + z * s * z.adjoint()
}

/// Achievable rate of IR `m` in nats: `ln|A_m| − ln|B_m|`.
pub fn rate_m(eff: &EffectiveChannels, d: &DesignPoint, m: usize) -> Result<f64> {
    check_point(eff, d)?;
    let z = &eff.z[m];
    let a = i_plus_quad(z, &d.sigma());
    let b = i_plus_quad(z, &d.sigma_without(&[m]));
    Ok(logdet_psd(&a)? - logdet_psd(&b)?)
}

/// Weighted sum rate in nats.
pub fn wsr(eff: &EffectiveChannels, d: &DesignPoint, omega: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    for (m, &w) in omega.iter().enumerate() {
        acc += w * rate_m(eff, d, m)?;
    }
    Ok(acc)
}

/// Weighted harvested power over the normalized threshold,
/// `(η/P̃_th) Σ_ℓ α_ℓ tr(Ξ_ℓ Σ Ξ_ℓᴴ)`.
pub fn harvested_power_norm(eff: &EffectiveChannels, d: &DesignPoint, cfg: &ScenarioConfig) -> f64 {
    let sigma = d.sigma();
    let mut acc = 0.0;
    for (l, xi) in eff.xi.iter().enumerate() {
        // tr(Ξ Σ Ξᴴ) = Σ_{ij} conj(Ξ_ij) (Ξ Σ)_ij
        let xs = xi * &sigma;
        let tr: f64 = xi.iter().zip(xs.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        acc += cfg.alpha(l) * tr;
    }
    cfg.eta / cfg.p_th_normalized() * acc
}

/// Harvest-constraint residual `1 + τ − P_H`.
pub fn residual_f(eff: &EffectiveChannels, d: &DesignPoint, cfg: &ScenarioConfig) -> f64 {
    1.0 + d.tau - harvested_power_norm(eff, d, cfg)
}

/// `R_sum − μ f − f² / (2ρ)` assembled from its parts.
pub fn penalized(wsr: f64, f: f64, pen: &PenaltyState) -> f64 {
    wsr - (pen.mu * f + 0.5 / pen.rho * f * f)
}

pub fn aug_objective(eff: &EffectiveChannels, d: &DesignPoint, pen: &PenaltyState, cfg: &ScenarioConfig) -> Result<f64> {
    if !(pen.rho > 0.0) {
        return Err(Error::ConfigInvalid("penalty parameter must be positive".into()));
    }
    let r = wsr(eff, d, &cfg.omegas())?;
    Ok(penalized(r, residual_f(eff, d, cfg), pen))
}

/// JSON encodings for complex vectors and matrices as `[re, im]` pairs.
pub(crate) mod wire {
    use super::*;
    use serde::{Deserializer, Serializer};

    fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
        m.row_iter().map(|r| r.iter().map(|z| [z.re, z.im]).collect()).collect()
    }

    fn from_rows<E: serde::de::Error>(rows: Vec<Vec<[f64; 2]>>) -> std::result::Result<CMatrix, E> {
        let nr = rows.len();
        let nc = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nc) {
            return Err(E::custom("ragged matrix"));
        }
        Ok(CMatrix::from_fn(nr, nc, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
    }

    pub mod matrices {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[CMatrix], s: S) -> std::result::Result<S::Ok, S::Error> {
            let rows: Vec<_> = v.iter().map(to_rows).collect();
            rows.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<CMatrix>, D::Error> {
            let raw: Vec<Vec<Vec<[f64; 2]>>> = Vec::deserialize(d)?;
            raw.into_iter().map(from_rows).collect()
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &CVector, s: S) -> std::result::Result<S::Ok, S::Error> {
            let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
            pairs.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<CVector, D::Error> {
            let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
            Ok(CVector::from_iterator(raw.len(), raw.iter().map(|p| Complex64::new(p[0], p[1]))))
        }
    }
}
