use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cxmat::{frobenius, CMatrix, CVector};
use crate::error::Result;
use crate::gradients::{fd_oracle, grad_phi, grad_x};
use crate::model::{effective_channels, noise_power, ChannelSet, ScenarioConfig};
use crate::objective::{aug_objective, harvested_power_norm, DesignPoint, PenaltyState};

const FD_STEP: f64 = 1e-6;
const REL_TOL: f64 = 1e-5;
const ABS_TOL: f64 = 1e-9;
/// Below this magnitude a derivative is judged by absolute error.
const NEAR_ZERO: f64 = ABS_TOL / REL_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradCheckDims {
    pub n_b: usize,
    pub n_i: usize,
    pub n_e: usize,
    pub n_s: usize,
    pub m_i: usize,
    pub m_e: usize,
}

impl Default for GradCheckDims {
    fn default() -> Self {
        Self {
            n_b: 3,
            n_i: 2,
            n_e: 2,
            n_s: 4,
            m_i: 2,
            m_e: 2,
        }
    }
}

/// A self-contained evaluation point for gradient checks.
#[derive(Debug, Clone)]
pub struct Instance {
    pub ch: ChannelSet,
    pub cfg: ScenarioConfig,
    pub point: DesignPoint,
    pub pen: PenaltyState,
}

impl Instance {
    pub fn objective(&self, d: &DesignPoint) -> f64 {
        let eff = effective_channels(&self.ch, &d.phi).expect("instance dimensions");
        aug_objective(&eff, d, &self.pen, &self.cfg).expect("finite objective")
    }
}

fn cn(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn cn_mat(rng: &mut impl Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| cn(rng))
}

/// Random unit-scale channels, a random PSD point with unit-modulus phases,
/// and a harvest threshold chosen so that `P_H` lands in `[0.5, 2]`.
pub fn random_instance(dims: GradCheckDims, rng: &mut impl Rng, zero_power: bool) -> Instance {
    let ch = ChannelSet {
        h_s: cn_mat(rng, dims.n_s, dims.n_b),
        h_i: (0..dims.m_i).map(|_| cn_mat(rng, dims.n_i, dims.n_b)).collect(),
        h_e: (0..dims.m_e).map(|_| cn_mat(rng, dims.n_e, dims.n_b)).collect(),
        g_i: (0..dims.m_i).map(|_| cn_mat(rng, dims.n_i, dims.n_s)).collect(),
        g_e: (0..dims.m_e).map(|_| cn_mat(rng, dims.n_e, dims.n_s)).collect(),
        normalized: true,
    };
    let x: Vec<CMatrix> = (0..dims.m_i)
        .map(|_| {
            let f = cn_mat(rng, dims.n_b, dims.n_b).scale(1.0 / dims.n_b as f64);
            let x = &f * f.adjoint();
            (&x + x.adjoint()).scale(0.5)
        })
        .collect();
    let phi = CVector::from_fn(dims.n_s, |_, _| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)));
    let mut cfg = ScenarioConfig {
        n_b: dims.n_b,
        n_i: dims.n_i,
        n_e: dims.n_e,
        n_s: dims.n_s,
        m_i: dims.m_i,
        m_e: dims.m_e,
        omega: (0..dims.m_i).map(|_| rng.random_range(0.5..2.0)).collect(),
        alpha: (0..dims.m_e).map(|_| rng.random_range(0.5..2.0)).collect(),
        ..ScenarioConfig::default()
    };
    let mut point = DesignPoint {
        x,
        phi,
        tau: rng.random_range(0.0..1.0),
    };
    // Calibrate the threshold on the random covariances, then zero them if asked.
    let eff = effective_channels(&ch, &point.phi).expect("consistent dims");
    let p_h_unit_threshold = harvested_power_norm(&eff, &point, &cfg) * cfg.p_th_normalized();
    let target = rng.random_range(0.5..2.0);
    cfg.p_th_mw = p_h_unit_threshold / target * noise_power(&cfg) * 1e3;
    if zero_power {
        point.x.iter_mut().for_each(|x| x.fill(Complex64::new(0.0, 0.0)));
    }
    let pen = PenaltyState {
        mu: rng.random_range(-1.0..1.0),
        rho: rng.random_range(0.5..2.0),
    };
    Instance { ch, cfg, point, pen }
}

fn hermitian_direction(rng: &mut impl Rng, n: usize) -> CMatrix {
    let a = cn_mat(rng, n, n);
    let h = (&a + a.adjoint()).scale(0.5);
    let norm = frobenius(&h);
    h.scale(1.0 / norm)
}

fn complex_direction(rng: &mut impl Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| cn(rng));
    let norm = v.norm();
    v.unscale(norm)
}

/// Accumulated finite-difference mismatches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    /// Largest `|fd − analytic| / |fd|` over derivatives with `|fd| ≥ 1e-4`.
    pub max_rel: f64,
    /// Largest `|fd − analytic|` over derivatives with `|fd| < 1e-4`.
    pub max_abs_near_zero: f64,
    pub near_zero: usize,
}

impl Mismatch {
    pub fn record(&mut self, fd: f64, analytic: f64) {
        let err = (fd - analytic).abs();
        if fd.abs() >= NEAR_ZERO {
            self.max_rel = self.max_rel.max(err / fd.abs());
        } else {
            self.max_abs_near_zero = self.max_abs_near_zero.max(err);
            self.near_zero += 1;
        }
    }

    pub fn within_tolerance(&self) -> bool {
        self.max_rel <= REL_TOL && self.max_abs_near_zero <= ABS_TOL
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub cases: usize,
    pub x: Mismatch,
    pub phi: Mismatch,
    pub rel_tolerance: f64,
    pub abs_tolerance: f64,
    pub passed: bool,
}

/// Compares the closed-form gradients with central differences on random
/// instances. Every tenth case sits at the zero-power point.
pub fn check_gradients(dims: GradCheckDims, seed: u64, cases: usize) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mx = Mismatch::default();
    let mut mp = Mismatch::default();
    for case in 0..cases {
        let inst = random_instance(dims, &mut rng, case % 10 == 9);
        let eff = effective_channels(&inst.ch, &inst.point.phi)?;
        let gx = grad_x(&eff, &inst.point, &inst.pen, &inst.cfg)?;
        let gp = grad_phi(&inst.ch, &eff, &inst.point, &inst.pen, &inst.cfg)?;
        let obj = |d: &DesignPoint| inst.objective(d);

        for m in 0..dims.m_i {
            let mut dir = DesignPoint {
                x: vec![CMatrix::zeros(dims.n_b, dims.n_b); dims.m_i],
                phi: CVector::zeros(dims.n_s),
                tau: 0.0,
            };
            dir.x[m] = hermitian_direction(&mut rng, dims.n_b);
            let fd = fd_oracle(obj, &inst.point, &dir, FD_STEP);
            // Re tr(Gᴴ Δ) = Σ_ij Re(conj(G_ij) Δ_ij)
            let analytic: f64 = gx.g[m].iter().zip(dir.x[m].iter()).map(|(g, d)| (g.conj() * d).re).sum();
            mx.record(fd, analytic);
        }

        let dir = DesignPoint {
            x: vec![CMatrix::zeros(dims.n_b, dims.n_b); dims.m_i],
            phi: complex_direction(&mut rng, dims.n_s),
            tau: 0.0,
        };
        let fd = fd_oracle(obj, &inst.point, &dir, FD_STEP);
        let analytic = 2.0 * gp.g.dotc(&dir.phi).re;
        mp.record(fd, analytic);
    }
    Ok(GradCheckReport {
        cases,
        x: mx,
        phi: mp,
        rel_tolerance: REL_TOL,
        abs_tolerance: ABS_TOL,
        passed: mx.within_tolerance() && mp.within_tolerance(),
    })
}
