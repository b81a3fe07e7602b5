//! Scenario description, channel generation and effective channels.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cxmat::{CMatrix, CVector};
use crate::error::{Error, Result};
use num_complex::Complex64;

/// Distance-dependent path loss `C0 · d^(-exponent)` per link class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathLossConfig {
    /// Reference loss at 1 m, in dB.
    pub c0_db: f64,
    pub exp_bs_irs: f64,
    pub exp_irs_ir: f64,
    pub exp_irs_er: f64,
    pub exp_bs_ir: f64,
    pub exp_bs_er: f64,
}

impl Default for PathLossConfig {
    fn default() -> Self {
        Self {
            c0_db: -30.0,
            exp_bs_irs: 2.2,
            exp_irs_ir: 2.2,
            exp_irs_er: 2.2,
            exp_bs_ir: 3.6,
            exp_bs_er: 3.6,
        }
    }
}

impl PathLossConfig {
    /// Linear power gain at distance `d` metres.
    pub fn gain(&self, d: f64, exponent: f64) -> f64 {
        10f64.powf(self.c0_db / 10.0) * d.powf(-exponent)
    }
}

/// Linear Rician K-factors per link class (0 = Rayleigh, infinity = pure LoS).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FadingConfig {
    pub k_bs_irs: f64,
    pub k_irs_ir: f64,
    pub k_irs_er: f64,
    pub k_bs_ir: f64,
    pub k_bs_er: f64,
}

impl Default for FadingConfig {
    fn default() -> Self {
        let k3db = 10f64.powf(0.3);
        Self {
            k_bs_irs: k3db,
            k_irs_ir: k3db,
            k_irs_er: k3db,
            k_bs_ir: 0.0,
            k_bs_er: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_b: usize,
    pub n_i: usize,
    pub n_e: usize,
    pub n_s: usize,
    pub m_i: usize,
    pub m_e: usize,
    pub p_b_dbm: f64,
    pub p_th_mw: f64,
    pub eta: f64,
    /// Rate weights; empty means all ones.
    pub omega: Vec<f64>,
    /// Harvest weights; empty means all ones.
    pub alpha: Vec<f64>,
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub bs_pos: [f64; 2],
    pub irs_pos: [f64; 2],
    pub ir_center: [f64; 2],
    pub ir_radius: f64,
    pub er_center_x: f64,
    pub er_radius: f64,
    pub pathloss: PathLossConfig,
    pub fading: FadingConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            n_b: 4,
            n_i: 2,
            n_e: 2,
            n_s: 100,
            m_i: 2,
            m_e: 4,
            p_b_dbm: 30.0,
            p_th_mw: 0.2,
            eta: 0.5,
            omega: Vec::new(),
            alpha: Vec::new(),
            noise_psd_dbm_hz: -160.0,
            bandwidth_hz: 1e6,
            bs_pos: [0.0, 0.0],
            irs_pos: [5.0, 2.0],
            ir_center: [400.0, 0.0],
            ir_radius: 4.0,
            er_center_x: 5.0,
            er_radius: 1.0,
            pathloss: PathLossConfig::default(),
            fading: FadingConfig::default(),
            seed: 0,
        }
    }
}

fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.to_string()));
        // n_s = 0 is allowed: it models a scenario without a surface.
        if self.n_b == 0 || self.n_i == 0 || self.n_e == 0 || self.m_i == 0 || self.m_e == 0 {
            return bad("antenna and user counts must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad("eta must lie in (0, 1]");
        }
        if !(self.p_th_mw > 0.0) || !self.p_th_mw.is_finite() {
            return bad("p_th_mw must be positive");
        }
        if !(self.bandwidth_hz > 0.0) {
            return bad("bandwidth_hz must be positive");
        }
        if !self.p_b_dbm.is_finite() || !self.noise_psd_dbm_hz.is_finite() {
            return bad("powers must be finite");
        }
        if !(self.ir_radius >= 0.0) || !(self.er_radius >= 0.0) {
            return bad("radii must be non-negative");
        }
        if !self.omega.is_empty() && self.omega.len() != self.m_i {
            return bad("omega must have m_i entries");
        }
        if !self.alpha.is_empty() && self.alpha.len() != self.m_e {
            return bad("alpha must have m_e entries");
        }
        if self.omega.iter().any(|&w| !(w > 0.0)) {
            return bad("omega entries must be positive");
        }
        // alpha_l = 0 switches an energy receiver off; negative weights are meaningless.
        if self.alpha.iter().any(|&a| !(a >= 0.0)) {
            return bad("alpha entries must be non-negative");
        }
        Ok(())
    }

    pub fn omega(&self, m: usize) -> f64 {
        self.omega.get(m).copied().unwrap_or(1.0)
    }

    pub fn alpha(&self, l: usize) -> f64 {
        self.alpha.get(l).copied().unwrap_or(1.0)
    }

    pub fn omegas(&self) -> Vec<f64> {
        (0..self.m_i).map(|m| self.omega(m)).collect()
    }

    /// Transmit power budget in watts (the unit of the normalized covariances).
    pub fn p_b_watts(&self) -> f64 {
        dbm_to_watts(self.p_b_dbm)
    }

    /// Harvest threshold divided by the noise power.
    pub fn p_th_normalized(&self) -> f64 {
        self.p_th_mw * 1e-3 / noise_power(self)
    }
}

/// Noise power σ² in watts from a PSD in dBm/Hz and a bandwidth in Hz.
pub fn noise_power(cfg: &ScenarioConfig) -> f64 {
    dbm_to_watts(cfg.noise_psd_dbm_hz) * cfg.bandwidth_hz
}

/// All channel matrices of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS → IRS, `n_s × n_b`.
    pub h_s: CMatrix,
    /// BS → IR m, `n_i × n_b`.
    pub h_i: Vec<CMatrix>,
    /// BS → ER ℓ, `n_e × n_b`.
    pub h_e: Vec<CMatrix>,
    /// IRS → IR m, `n_i × n_s`.
    pub g_i: Vec<CMatrix>,
    /// IRS → ER ℓ, `n_e × n_s`.
    pub g_e: Vec<CMatrix>,
    pub normalized: bool,
}

impl ChannelSet {
    /// Divides every BS-side matrix by σ. Refuses to run twice.
    pub fn normalize(&mut self, sigma: f64) -> Result<()> {
        if self.normalized {
            return Err(Error::AlreadyNormalized);
        }
        let inv = 1.0 / sigma;
        self.h_s.scale_mut(inv);
        self.h_i.iter_mut().for_each(|h| h.scale_mut(inv));
        self.h_e.iter_mut().for_each(|h| h.scale_mut(inv));
        self.normalized = true;
        Ok(())
    }

    pub fn n_b(&self) -> usize {
        self.h_s.ncols()
    }

    pub fn n_s(&self) -> usize {
        self.h_s.nrows()
    }

    pub fn m_i(&self) -> usize {
        self.h_i.len()
    }

    pub fn m_e(&self) -> usize {
        self.h_e.len()
    }

    /// Same channels with every IRS-side matrix zeroed.
    pub fn without_irs(&self) -> Self {
        let zero = |g: &CMatrix| CMatrix::zeros(g.nrows(), g.ncols());
        Self {
            g_i: self.g_i.iter().map(zero).collect(),
            g_e: self.g_e.iter().map(zero).collect(),
            ..self.clone()
        }
    }

    /// Checks internal shape consistency and agreement with a scenario.
    pub fn check_dims(&self, cfg: &ScenarioConfig) -> Result<()> {
        let mismatch = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        let (nb, ns) = (cfg.n_b, cfg.n_s);
        if self.h_s.shape() != (ns, nb) {
            return mismatch("h_s");
        }
        if self.h_i.len() != cfg.m_i || self.g_i.len() != cfg.m_i {
            return mismatch("number of information receivers");
        }
        if self.h_e.len() != cfg.m_e || self.g_e.len() != cfg.m_e {
            return mismatch("number of energy receivers");
        }
        if self.h_i.iter().any(|h| h.shape() != (cfg.n_i, nb)) || self.g_i.iter().any(|g| g.shape() != (cfg.n_i, ns)) {
            return mismatch("information receiver channels");
        }
        if self.h_e.iter().any(|h| h.shape() != (cfg.n_e, nb)) || self.g_e.iter().any(|g| g.shape() != (cfg.n_e, ns)) {
            return mismatch("energy receiver channels");
        }
        Ok(())
    }

    /// Stable fingerprint of every entry, used to prove that paired runs saw
    /// identical channels.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        let mut feed = |m: &CMatrix| {
            hasher.update((m.nrows() as u64).to_le_bytes());
            hasher.update((m.ncols() as u64).to_le_bytes());
            for z in m.iter() {
                hasher.update(z.re.to_le_bytes());
                hasher.update(z.im.to_le_bytes());
            }
        };
        feed(&self.h_s);
        self.h_i.iter().chain(&self.h_e).chain(&self.g_i).chain(&self.g_e).for_each(&mut feed);
        hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn complex_gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn unit_phasor(rng: &mut impl Rng) -> Complex64 {
    Complex64::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
}

/// One `rows × cols` link: `sqrt(gain) · (sqrt(K/(1+K)) a bᴴ + sqrt(1/(1+K)) W)`
/// with unit-modulus `a`, `b` and `W` i.i.d. CN(0, 1).
pub fn draw_link(rng: &mut impl Rng, rows: usize, cols: usize, gain: f64, k_factor: f64) -> CMatrix {
    let a: Vec<Complex64> = (0..rows).map(|_| unit_phasor(rng)).collect();
    let b: Vec<Complex64> = (0..cols).map(|_| unit_phasor(rng)).collect();
    let (los_w, nlos_w) = if k_factor.is_infinite() {
        (1.0, 0.0)
    } else {
        ((k_factor / (1.0 + k_factor)).sqrt(), (1.0 / (1.0 + k_factor)).sqrt())
    };
    let amp = gain.sqrt();
    CMatrix::from_fn(rows, cols, |i, j| {
        let los = a[i] * b[j].conj();
        let nlos = complex_gaussian(rng);
        (los * los_w + nlos * nlos_w) * amp
    })
}

fn point_in_disc(rng: &mut impl Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random_range(0.0f64..1.0).sqrt();
    let t = rng.random_range(0.0..2.0 * PI);
    [center[0] + r * t.cos(), center[1] + r * t.sin()]
}

fn distance(a: [f64; 2], b: [f64; 2], what: &str) -> Result<f64> {
    let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    if d > 0.0 {
        Ok(d)
    } else {
        Err(Error::DegenerateGeometry(format!("{what} distance is zero")))
    }
}

/// Draws receiver positions and every link, then noise-normalizes.
pub fn generate_channels(cfg: &ScenarioConfig, rng: &mut impl Rng) -> Result<ChannelSet> {
    cfg.validate()?;
    let pl = &cfg.pathloss;
    let fd = &cfg.fading;
    let ir_pos: Vec<[f64; 2]> = (0..cfg.m_i).map(|_| point_in_disc(rng, cfg.ir_center, cfg.ir_radius)).collect();
    let er_pos: Vec<[f64; 2]> = (0..cfg.m_e)
        .map(|_| point_in_disc(rng, [cfg.er_center_x, 0.0], cfg.er_radius))
        .collect();

    let d_bs_irs = distance(cfg.bs_pos, cfg.irs_pos, "BS-IRS")?;
    let h_s = draw_link(rng, cfg.n_s, cfg.n_b, pl.gain(d_bs_irs, pl.exp_bs_irs), fd.k_bs_irs);

    let mut h_i = Vec::with_capacity(cfg.m_i);
    let mut g_i = Vec::with_capacity(cfg.m_i);
    for &p in &ir_pos {
        let d_direct = distance(cfg.bs_pos, p, "BS-IR")?;
        let d_refl = distance(cfg.irs_pos, p, "IRS-IR")?;
        h_i.push(draw_link(rng, cfg.n_i, cfg.n_b, pl.gain(d_direct, pl.exp_bs_ir), fd.k_bs_ir));
        g_i.push(draw_link(rng, cfg.n_i, cfg.n_s, pl.gain(d_refl, pl.exp_irs_ir), fd.k_irs_ir));
    }
    let mut h_e = Vec::with_capacity(cfg.m_e);
    let mut g_e = Vec::with_capacity(cfg.m_e);
    for &p in &er_pos {
        let d_direct = distance(cfg.bs_pos, p, "BS-ER")?;
        let d_refl = distance(cfg.irs_pos, p, "IRS-ER")?;
        h_e.push(draw_link(rng, cfg.n_e, cfg.n_b, pl.gain(d_direct, pl.exp_bs_er), fd.k_bs_er));
        g_e.push(draw_link(rng, cfg.n_e, cfg.n_s, pl.gain(d_refl, pl.exp_irs_er), fd.k_irs_er));
    }

    let mut ch = ChannelSet {
        h_s,
        h_i,
        h_e,
        g_i,
        g_e,
        normalized: false,
    };
    ch.normalize(noise_power(cfg).sqrt())?;
    Ok(ch)
}

/// Composite direct-plus-reflected channels for one phase vector.
#[derive(Debug, Clone)]
pub struct EffectiveChannels {
    pub z: Vec<CMatrix>,
    pub xi: Vec<CMatrix>,
}

/// `Z_m = H_mI + G_mI diag(φ) H_S` and `Ξ_ℓ = H_ℓE + G_ℓE diag(φ) H_S`.
///
/// The unit-modulus condition on `φ` is not enforced here so that the same
/// routine serves finite-difference probes off the torus.
pub fn effective_channels(ch: &ChannelSet, phi: &CVector) -> Result<EffectiveChannels> {
    if phi.len() != ch.n_s() {
        return Err(Error::DimensionMismatch(format!(
            "phase vector has {} entries, surface has {}",
            phi.len(),
            ch.n_s()
        )));
    }
    let mut phi_hs = ch.h_s.clone();
    for (mut row, &p) in phi_hs.row_iter_mut().zip(phi.iter()) {
        row *= p;
    }
    let compose = |h: &CMatrix, g: &CMatrix| -> Result<CMatrix> {
        if g.ncols() != ch.n_s() || g.nrows() != h.nrows() || h.ncols() != ch.n_b() {
            return Err(Error::DimensionMismatch("link shapes disagree".into()));
        }
        Ok(h + g * &phi_hs)
    };
    let z = ch.h_i.iter().zip(&ch.g_i).map(|(h, g)| compose(h, g)).collect::<Result<_>>()?;
    let xi = ch.h_e.iter().zip(&ch.g_e).map(|(h, g)| compose(h, g)).collect::<Result<_>>()?;
    Ok(EffectiveChannels { z, xi })
}
