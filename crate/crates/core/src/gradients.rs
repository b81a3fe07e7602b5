//! Closed-form gradients of the augmented Lagrangian with respect to the
//! conjugate design variables.
//!
//! Directional derivatives follow two conventions. Covariance blocks are
//! Hermitian, so along a Hermitian direction `Δ` the derivative is
//! `Re tr(Gᴴ Δ)`. The phase vector is an unconstrained complex variable, so
//! along `δ` the derivative is `2 Re(gᴴ δ)`.

use num_complex::Complex64;

use crate::cxmat::{inv_hpd, inv_sqrt_psd, CMatrix, CVector};
use crate::error::Result;
use crate::model::{ChannelSet, EffectiveChannels, ScenarioConfig};
use crate::objective::{i_plus_quad, residual_f, DesignPoint, PenaltyState};

/// One Hermitian gradient block per information receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct GradX {
    pub g: Vec<CMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradPhi {
    pub g: CVector,
}

/// `(μ + f/ρ)`: weight on the harvested-power gradient.
pub fn penalty_weight(eff: &EffectiveChannels, d: &DesignPoint, pen: &PenaltyState, cfg: &ScenarioConfig) -> f64 {
    pen.mu + residual_f(eff, d, cfg) / pen.rho
}

/// `W^{-1/2} (I + W^{-1/2} Q W^{-1/2})^{-1} W^{-1/2}` with `W = I + Z S Zᴴ`
/// and `Q = Z X Zᴴ`.
fn sandwich(z: &CMatrix, interference: &CMatrix, own: &CMatrix) -> Result<CMatrix> {
    let w = i_plus_quad(z, interference);
    let w_isqrt = inv_sqrt_psd(&w)?;
    let n = z.nrows();
    let c = CMatrix::identity(n, n) + &w_isqrt * z * own * z.adjoint() * &w_isqrt;
    Ok(&w_isqrt * inv_hpd(&c)? * &w_isqrt)
}

/// Gradient of `R_k` with respect to `X_m`.
pub fn rate_grad_block(eff: &EffectiveChannels, d: &DesignPoint, k: usize, m: usize) -> Result<CMatrix> {
    let z = &eff.z[k];
    let inner = if m == k {
        // B_m and C_m
        sandwich(z, &d.sigma_without(&[m]), &d.x[m])?
    } else {
        // B̄ excludes X_m, B̂ excludes both X_m and X_k
        let bar = sandwich(z, &d.sigma_without(&[m]), &d.x[m])?;
        let hat = sandwich(z, &d.sigma_without(&[m, k]), &d.x[m])?;
        bar - hat
    };
    Ok(z.adjoint() * inner * z)
}

/// `Σ_k ω_k ∇_{X_m} R_k` for every `m`.
///
/// Each sandwich collapses to a plain inverse, `(W + Q)⁻¹`, so receiver `k`
/// contributes `Z_kᴴ A_k⁻¹ Z_k` to its own block and
/// `Z_kᴴ (A_k⁻¹ − B_k⁻¹) Z_k` to every other block.
pub fn wsr_grad_x(eff: &EffectiveChannels, d: &DesignPoint, omega: &[f64]) -> Result<Vec<CMatrix>> {
    let n = d.x[0].nrows();
    let mut acc = vec![CMatrix::zeros(n, n); d.x.len()];
    let sigma = d.sigma();
    for (k, &w) in omega.iter().enumerate() {
        let z = &eff.z[k];
        let a_inv = inv_hpd(&i_plus_quad(z, &sigma))?;
        let b_inv = inv_hpd(&i_plus_quad(z, &(&sigma - &d.x[k])))?;
        let own = z.adjoint() * &a_inv * z;
        let cross = z.adjoint() * (a_inv - b_inv) * z;
        for (m, block) in acc.iter_mut().enumerate() {
            let term = if m == k { &own } else { &cross };
            *block += term.scale(w);
        }
    }
    Ok(acc)
}

/// `(η/P̃_th) Σ_ℓ α_ℓ Ξ_ℓᴴ Ξ_ℓ`, shared by every block.
pub fn harvest_grad_x(eff: &EffectiveChannels, cfg: &ScenarioConfig, n_b: usize) -> CMatrix {
    let mut acc = CMatrix::zeros(n_b, n_b);
    for (l, xi) in eff.xi.iter().enumerate() {
        acc += (xi.adjoint() * xi).scale(cfg.alpha(l));
    }
    acc.scale(cfg.eta / cfg.p_th_normalized())
}

fn hermitian(m: CMatrix) -> CMatrix {
    (&m + m.adjoint()).scale(0.5)
}

/// Combines WSR and harvest gradients with a given penalty weight.
pub fn combine_grad_x(wsr_part: Vec<CMatrix>, harvest_part: &CMatrix, weight: f64) -> GradX {
    GradX {
        g: wsr_part.into_iter().map(|g| hermitian(g + harvest_part.scale(weight))).collect(),
    }
}

pub fn grad_x(eff: &EffectiveChannels, d: &DesignPoint, pen: &PenaltyState, cfg: &ScenarioConfig) -> Result<GradX> {
    let wsr_part = wsr_grad_x(eff, d, &cfg.omegas())?;
    let harvest = harvest_grad_x(eff, cfg, d.x[0].nrows());
    Ok(combine_grad_x(wsr_part, &harvest, penalty_weight(eff, d, pen, cfg)))
}

/// `acc[n] += w · vecd(Gᴴ M H_Sᴴ)[n]` without forming the `n_s × n_s` product.
fn accumulate_vecd(acc: &mut CVector, g: &CMatrix, m: &CMatrix, h_s: &CMatrix, w: f64) {
    // (M H_Sᴴ)[i, n] = Σ_b M[i, b] conj(H_S[n, b])
    let mh = m * h_s.adjoint();
    for n in 0..acc.len() {
        let mut s = Complex64::new(0.0, 0.0);
        for i in 0..g.nrows() {
            s += g[(i, n)].conj() * mh[(i, n)];
        }
        acc[n] += s * w;
    }
}

/// `Σ_m ω_m vecd(G_mᴴ D_m H_Sᴴ)` with `D_m = A_m⁻¹ Z_m Σ − B_m⁻¹ Z_m Σ_m`.
pub fn wsr_grad_phi(ch: &ChannelSet, eff: &EffectiveChannels, d: &DesignPoint, omega: &[f64]) -> Result<CVector> {
    let mut acc = CVector::zeros(ch.n_s());
    let sigma = d.sigma();
    for (m, &w) in omega.iter().enumerate() {
        let z = &eff.z[m];
        let sigma_m = d.sigma_without(&[m]);
        let a_inv = inv_hpd(&i_plus_quad(z, &sigma))?;
        let b_inv = inv_hpd(&i_plus_quad(z, &sigma_m))?;
        let dm = a_inv * z * &sigma - b_inv * z * &sigma_m;
        accumulate_vecd(&mut acc, &ch.g_i[m], &dm, &ch.h_s, w);
    }
    Ok(acc)
}

/// `(η/P̃_th) Σ_ℓ α_ℓ vecd(G_ℓEᴴ Ξ_ℓ Σ H_Sᴴ)`.
pub fn harvest_grad_phi(ch: &ChannelSet, eff: &EffectiveChannels, d: &DesignPoint, cfg: &ScenarioConfig) -> CVector {
    let mut acc = CVector::zeros(ch.n_s());
    let sigma = d.sigma();
    for (l, xi) in eff.xi.iter().enumerate() {
        accumulate_vecd(&mut acc, &ch.g_e[l], &(xi * &sigma), &ch.h_s, cfg.alpha(l));
    }
    acc.scale_mut(cfg.eta / cfg.p_th_normalized());
    acc
}

pub fn grad_phi(
    ch: &ChannelSet,
    eff: &EffectiveChannels,
    d: &DesignPoint,
    pen: &PenaltyState,
    cfg: &ScenarioConfig,
) -> Result<GradPhi> {
    let wsr_part = wsr_grad_phi(ch, eff, d, &cfg.omegas())?;
    let harvest = harvest_grad_phi(ch, eff, d, cfg);
    let weight = penalty_weight(eff, d, pen, cfg);
    Ok(GradPhi {
        g: wsr_part + harvest.scale(weight),
    })
}

/// Values that can be displaced along a direction: `self + t · dir`.
pub trait Displace {
    fn displaced(&self, direction: &Self, t: f64) -> Self;
}

impl Displace for f64 {
    fn displaced(&self, direction: &Self, t: f64) -> Self {
        self + t * direction
    }
}

impl Displace for CMatrix {
    fn displaced(&self, direction: &Self, t: f64) -> Self {
        self + direction.scale(t)
    }
}

impl Displace for CVector {
    fn displaced(&self, direction: &Self, t: f64) -> Self {
        self + direction * Complex64::new(t, 0.0)
    }
}

impl Displace for DesignPoint {
    fn displaced(&self, direction: &Self, t: f64) -> Self {
        DesignPoint {
            x: self.x.iter().zip(&direction.x).map(|(a, b)| a + b.scale(t)).collect(),
            phi: self.phi.displaced(&direction.phi, t),
            tau: self.tau + t * direction.tau,
        }
    }
}

/// Central finite difference of `objective` at `point` along `direction`.
pub fn fd_oracle<P: Displace>(objective: impl Fn(&P) -> f64, point: &P, direction: &P, step: f64) -> f64 {
    let plus = objective(&point.displaced(direction, step));
    let minus = objective(&point.displaced(direction, -step));
    (plus - minus) / (2.0 * step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cxmat::frobenius;
    use crate::harness::{check_gradients, random_instance, GradCheckDims};
    use crate::model::effective_channels;
    use crate::objective::aug_objective;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn fd_oracle_exact_on_quadratics() {
        // q(x) = 3x² − 2x + 1 at x = 0.7 along direction 2
        let q = |x: &f64| 3.0 * x * x - 2.0 * x + 1.0;
        let fd = fd_oracle(q, &0.7, &2.0, 1e-3);
        assert!((fd - 2.0 * (6.0 * 0.7 - 2.0)).abs() < 1e-10);
        assert_eq!(fd_oracle(|_: &f64| 4.2, &1.0, &1.0, 1e-6), 0.0);
    }

    #[test]
    fn zero_power_single_user_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = GradCheckDims { m_i: 1, m_e: 1, ..GradCheckDims::default() };
        let mut inst = random_instance(dims, &mut rng, true);
        inst.cfg.alpha = vec![0.0];
        inst.cfg.omega = vec![1.0];
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        let g = grad_x(&eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        let z = &eff.z[0];
        assert!(frobenius(&(&g.g[0] - z.adjoint() * z)) < 1e-12);

        let gp = grad_phi(&inst.ch, &eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        assert_eq!(gp.g.norm(), 0.0);
    }

    #[test]
    fn decoupled_surface_has_zero_phase_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut inst = random_instance(GradCheckDims::default(), &mut rng, false);
        inst.ch.g_i.iter_mut().for_each(|g| g.fill(c(0.0)));
        inst.cfg.alpha = vec![0.0; inst.cfg.m_e];
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        let gp = grad_phi(&inst.ch, &eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        assert_eq!(gp.g.norm(), 0.0);
    }

    #[test]
    fn single_receiver_uses_own_term_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = GradCheckDims { m_i: 1, ..GradCheckDims::default() };
        let inst = random_instance(dims, &mut rng, false);
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        let g = grad_x(&eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        let own = rate_grad_block(&eff, &inst.point, 0, 0).unwrap().scale(inst.cfg.omega(0));
        let harvest = harvest_grad_x(&eff, &inst.cfg, 3).scale(penalty_weight(&eff, &inst.point, &inst.pen, &inst.cfg));
        assert!(frobenius(&(&g.g[0] - own - harvest)) < 1e-10 * frobenius(&g.g[0]));
    }

    #[test]
    fn own_sandwich_equals_plain_inverse() {
        // Z_mᴴ B^{-1/2} C^{-1} B^{-1/2} Z_m = Z_mᴴ A_m^{-1} Z_m
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inst = random_instance(GradCheckDims::default(), &mut rng, false);
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        for m in 0..2 {
            let z = &eff.z[m];
            let a_inv = inv_hpd(&i_plus_quad(z, &inst.point.sigma())).unwrap();
            let want = z.adjoint() * a_inv * z;
            let got = rate_grad_block(&eff, &inst.point, m, m).unwrap();
            assert!(frobenius(&(got - &want)) < 1e-10 * frobenius(&want));
        }
    }

    #[test]
    fn collapsed_gradient_matches_sandwich_blocks() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(40 + seed);
            let dims = GradCheckDims { m_i: 3, ..Default::default() };
            let inst = random_instance(dims, &mut rng, false);
            let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
            let omega = inst.cfg.omegas();
            let fast = wsr_grad_x(&eff, &inst.point, &omega).unwrap();
            for (m, got) in fast.iter().enumerate() {
                let mut want = CMatrix::zeros(got.nrows(), got.ncols());
                for (k, &w) in omega.iter().enumerate() {
                    want += rate_grad_block(&eff, &inst.point, k, m).unwrap().scale(w);
                }
                assert!(frobenius(&(got - &want)) <= 1e-9 * (1.0 + frobenius(&want)), "seed {seed} block {m}");
            }
        }
    }

    #[test]
    fn scalar_case_matches_hand_derivative() {
        let dims = GradCheckDims { n_b: 1, n_i: 1, n_e: 1, n_s: 1, m_i: 1, m_e: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(dims, &mut rng, false);
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        let z = eff.z[0][(0, 0)];
        let xi = eff.xi[0][(0, 0)];
        let x = inst.point.x[0][(0, 0)].re;
        let cfg = &inst.cfg;
        let k = cfg.eta * cfg.alpha(0) / cfg.p_th_normalized();
        // R = ω ln(1 + |z|² x), P_H = k |ξ|² x, f = 1 + τ − P_H
        let f = 1.0 + inst.point.tau - k * xi.norm_sqr() * x;
        let want = cfg.omega(0) * z.norm_sqr() / (1.0 + z.norm_sqr() * x) + (inst.pen.mu + f / inst.pen.rho) * k * xi.norm_sqr();
        let g = grad_x(&eff, &inst.point, &inst.pen, cfg).unwrap();
        assert!((g.g[0][(0, 0)].re - want).abs() < 1e-12 * want.abs().max(1.0));
        assert!(g.g[0][(0, 0)].im.abs() < 1e-15);

        // d/dφ* of ln(1 + |h + g φ s|² x) = conj(g) s̄ ... computed via z:
        // ∂|z|²/∂φ* = z · conj(g s), so ∂R/∂φ* = ω x z conj(g s) / (1 + |z|² x)
        let gs = inst.ch.g_i[0][(0, 0)] * inst.ch.h_s[(0, 0)];
        let ge_s = inst.ch.g_e[0][(0, 0)] * inst.ch.h_s[(0, 0)];
        let want_phi = z * gs.conj() * (cfg.omega(0) * x / (1.0 + z.norm_sqr() * x))
            + xi * ge_s.conj() * (k * x * (inst.pen.mu + f / inst.pen.rho));
        let gp = grad_phi(&inst.ch, &eff, &inst.point, &inst.pen, cfg).unwrap();
        assert!((gp.g[0] - want_phi).norm() < 1e-12 * want_phi.norm().max(1.0));
    }

    #[test]
    fn finite_difference_suite() {
        let report = check_gradients(GradCheckDims::default(), 2024, 50).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn gradients_hermitian_and_label_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dims = GradCheckDims { m_i: 3, ..GradCheckDims::default() };
        let inst = random_instance(dims, &mut rng, false);
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        let g = grad_x(&eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        for b in &g.g {
            assert!(frobenius(&(b - b.adjoint())) <= 1e-9 * (1.0 + frobenius(b)));
        }

        // swap receivers 0 and 2 everywhere
        let perm = [2usize, 1, 0];
        let mut swapped = inst.clone();
        swapped.ch.h_i = perm.iter().map(|&i| inst.ch.h_i[i].clone()).collect();
        swapped.ch.g_i = perm.iter().map(|&i| inst.ch.g_i[i].clone()).collect();
        swapped.cfg.omega = perm.iter().map(|&i| inst.cfg.omega[i]).collect();
        swapped.point.x = perm.iter().map(|&i| inst.point.x[i].clone()).collect();
        let eff_s = effective_channels(&swapped.ch, &swapped.point.phi).unwrap();
        let gs = grad_x(&eff_s, &swapped.point, &swapped.pen, &swapped.cfg).unwrap();
        for (j, &i) in perm.iter().enumerate() {
            assert!(frobenius(&(&gs.g[j] - &g.g[i])) <= 1e-10 * (1.0 + frobenius(&g.g[i])));
        }
    }

    #[test]
    fn vanishing_penalty_recovers_wsr_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut inst = random_instance(GradCheckDims::default(), &mut rng, false);
        inst.pen = PenaltyState { mu: 0.0, rho: 1e12 };
        let eff = effective_channels(&inst.ch, &inst.point.phi).unwrap();
        let g = grad_x(&eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        let pure = wsr_grad_x(&eff, &inst.point, &inst.cfg.omegas()).unwrap();
        for (a, b) in g.g.iter().zip(&pure) {
            assert!(frobenius(&(a - b)) <= 1e-6);
        }
        let gp = grad_phi(&inst.ch, &eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
        let pure_phi = wsr_grad_phi(&inst.ch, &eff, &inst.point, &inst.cfg.omegas()).unwrap();
        assert!((gp.g - pure_phi).norm() <= 1e-6);
        let _ = aug_objective(&eff, &inst.point, &inst.pen, &inst.cfg).unwrap();
    }
}
