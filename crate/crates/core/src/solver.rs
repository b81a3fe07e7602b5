//! Penalty dual decomposition with an alternating projected-gradient inner loop.

use std::io::Write;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::cxmat::{frobenius, herm_eig, hermitianize, CMatrix, CVector};
use crate::error::{Error, Result};
use crate::gradients::{combine_grad_x, harvest_grad_phi, harvest_grad_x, wsr_grad_phi, wsr_grad_x};
use crate::model::{effective_channels, ChannelSet, EffectiveChannels, ScenarioConfig};
use crate::objective::{harvested_power_norm, penalized, wsr, DesignPoint, PenaltyState};
use crate::projections::{project_covariances, project_phases};

/// Denominators smaller than this are replaced by it in relative tests.
const DENOM_FLOOR: f64 = 1e-12;

/// Most negative covariance eigenvalue tolerated in an iterate.
const PSD_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub mu0: f64,
    pub rho0: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub delta_x0: f64,
    pub delta_phi0: f64,
    pub ls_shrink: f64,
    pub ls_grow: f64,
    pub ls_max: usize,
    pub inner_max: usize,
    pub outer_max: usize,
    /// When false the harvest constraint is dropped and the solver maximizes
    /// the plain weighted sum rate.
    pub harvest_constraint: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            mu0: 0.0,
            rho0: 1.0,
            kappa: 0.1,
            epsilon: 1e-3,
            delta_x0: 1.0,
            delta_phi0: 1.0,
            ls_shrink: 0.5,
            ls_grow: 2.0,
            ls_max: 30,
            inner_max: 2000,
            outer_max: 30,
            harvest_constraint: true,
        }
    }
}

impl SolverConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::ConfigInvalid(msg.to_string()));
        if !(self.rho0 > 0.0) {
            return bad("rho0 must be positive");
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return bad("kappa must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.delta_x0 > 0.0 && self.delta_phi0 > 0.0) {
            return bad("initial steps must be positive");
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) || !(self.ls_grow >= 1.0) {
            return bad("line-search factors out of range");
        }
        if self.inner_max == 0 || self.outer_max == 0 {
            return bad("iteration caps must be at least 1");
        }
        if !self.mu0.is_finite() {
            return bad("mu0 must be finite");
        }
        Ok(())
    }

    /// Penalty parameter used during outer round `k`.
    pub fn rho_at(&self, k: usize) -> f64 {
        self.rho0 * self.kappa.powi(k as i32)
    }
}

/// One row of the convergence trace. Row `inner = 0` is the state at the
/// start of an outer round, evaluated with that round's `(μ, ρ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer: usize,
    pub inner: usize,
    pub aug_obj_nats: f64,
    pub wsr_nats: f64,
    pub f: f64,
    pub rho: f64,
    pub mu: f64,
    pub step_x: f64,
    pub step_phi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(rename = "final")]
    pub final_point: DesignPoint,
    pub feasible: bool,
    pub converged: bool,
    pub wsr_nats: f64,
    pub wsr_bits: f64,
    pub harvested_norm: f64,
    pub residual: f64,
    pub total_power: f64,
    pub outer_rounds: usize,
    pub inner_iterations: usize,
    /// Norm of the projected-gradient step `Π(v + ∇) − v` at termination.
    pub projected_gradient_norm: f64,
    pub trace: Vec<TraceRow>,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.trace {
            w.serialize(row).map_err(|e| Error::ConfigInvalid(format!("csv: {e}")))?;
        }
        w.flush().map_err(|e| Error::ConfigInvalid(format!("csv: {e}")))?;
        Ok(())
    }
}

/// Outcome of one backtracking search.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome<P> {
    /// Accepted step, `0` if no candidate improved on the current value.
    pub step: f64,
    pub value: f64,
    pub point: Option<P>,
    pub evaluations: usize,
}

/// Monotone backtracking: tries `first, first·shrink, …` (at most
/// `max_shrinks` reductions) and accepts the first candidate whose objective
/// is finite and not below `current`.
pub fn line_search<P>(
    first: f64,
    shrink: f64,
    max_shrinks: usize,
    current: f64,
    mut trial: impl FnMut(f64) -> Result<(f64, P)>,
) -> Result<LineSearchOutcome<P>> {
    let mut step = first;
    for j in 0..=max_shrinks {
        let (value, point) = trial(step)?;
        if value.is_finite() && value >= current {
            return Ok(LineSearchOutcome {
                step,
                value,
                point: Some(point),
                evaluations: j + 1,
            });
        }
        step *= shrink;
    }
    Ok(LineSearchOutcome {
        step: 0.0,
        value: current,
        point: None,
        evaluations: max_shrinks + 1,
    })
}

/// Warm-started step size: the next trial is `grow ×` the last accepted step.
#[derive(Debug, Clone, Copy)]
struct StepControl {
    next: f64,
    grow: f64,
}

impl StepControl {
    fn record(&mut self, accepted: f64) {
        // a failed search keeps the previous trial step
        if accepted > 0.0 {
            self.next = accepted * self.grow;
        }
    }
}

/// Maximizer over `τ ≥ 0` of the augmented Lagrangian:
/// `max{0, P_H − 1 − μρ}`.
pub fn update_tau(p_h: f64, mu: f64, rho: f64) -> f64 {
    (p_h - 1.0 - mu * rho).max(0.0)
}

/// Precoder `F = U diag(√λ)` with `F Fᴴ = X`.
pub fn factor_precoders(x: &CMatrix) -> Result<CMatrix> {
    let eig = herm_eig(x)?;
    let min = eig.min_eigenvalue();
    if min < -1e-9 * (1.0 + frobenius(x)) {
        return Err(Error::NonPsd { min_eigenvalue: min });
    }
    let mut f = eig.eigenvectors.clone();
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        f.column_mut(j).scale_mut(l.max(0.0).sqrt());
    }
    Ok(f)
}

/// Options that turn the solver into the fixed-phase baselines.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub initial_phi: Option<CVector>,
    pub optimize_phi: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            initial_phi: None,
            optimize_phi: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Eval {
    aug: f64,
    wsr: f64,
    f: f64,
    p_h: f64,
}

struct Problem<'a> {
    ch: &'a ChannelSet,
    cfg: &'a ScenarioConfig,
    omega: Vec<f64>,
    harvest: bool,
}

impl Problem<'_> {
    fn eval(&self, eff: &EffectiveChannels, d: &DesignPoint, pen: &PenaltyState) -> Result<Eval> {
        let r = wsr(eff, d, &self.omega)?;
        let p_h = harvested_power_norm(eff, d, self.cfg);
        let f = if self.harvest { 1.0 + d.tau - p_h } else { 0.0 };
        Ok(Eval {
            aug: penalized(r, f, pen),
            wsr: r,
            f,
            p_h,
        })
    }

    /// Re-evaluates after a slack change; `P_H` and the rates do not depend on `τ`.
    fn with_tau(&self, e: Eval, tau: f64, pen: &PenaltyState) -> Eval {
        let f = 1.0 + tau - e.p_h;
        Eval {
            aug: penalized(e.wsr, f, pen),
            f,
            ..e
        }
    }

    fn weight(&self, e: &Eval, pen: &PenaltyState) -> f64 {
        if self.harvest {
            pen.mu + e.f / pen.rho
        } else {
            0.0
        }
    }

    fn grad_x(&self, eff: &EffectiveChannels, d: &DesignPoint, e: &Eval, pen: &PenaltyState) -> Result<Vec<CMatrix>> {
        let wsr_part = wsr_grad_x(eff, d, &self.omega)?;
        let harvest = harvest_grad_x(eff, self.cfg, self.ch.n_b());
        Ok(combine_grad_x(wsr_part, &harvest, self.weight(e, pen)).g)
    }

    fn grad_phi(&self, eff: &EffectiveChannels, d: &DesignPoint, e: &Eval, pen: &PenaltyState) -> Result<CVector> {
        let mut g = wsr_grad_phi(self.ch, eff, d, &self.omega)?;
        let w = self.weight(e, pen);
        if w != 0.0 {
            g += harvest_grad_phi(self.ch, eff, d, self.cfg).scale(w);
        }
        Ok(g)
    }
}

fn ascend_x(x: &[CMatrix], g: &[CMatrix], step: f64, p_b: f64) -> Result<Vec<CMatrix>> {
    let moved: Vec<CMatrix> = x
        .iter()
        .zip(g)
        .map(|(a, b)| hermitianize(&(a + b.scale(step))))
        .collect::<Result<_>>()?;
    project_covariances(&moved, p_b)
}

fn ascend_phi(phi: &CVector, g: &CVector, step: f64) -> CVector {
    project_phases(&(phi + g.scale(step)))
}

fn check_iterate(d: &DesignPoint, p_b: f64) -> Result<()> {
    let total = d.total_power();
    if total > p_b + 1e-9 {
        return Err(Error::NumericalBreakdown(format!("power {total} exceeds budget {p_b}")));
    }
    for x in &d.x {
        let min = herm_eig(x)?.min_eigenvalue();
        if min < -PSD_SLACK {
            return Err(Error::NumericalBreakdown(format!("covariance eigenvalue {min}")));
        }
    }
    if d.phi.iter().any(|z| (z.norm() - 1.0).abs() > 1e-9) {
        return Err(Error::NumericalBreakdown("phase left the unit circle".into()));
    }
    Ok(())
}

fn relative(num: f64, den: f64) -> f64 {
    num.abs() / den.abs().max(DENOM_FLOOR)
}

pub fn solve(ch: &ChannelSet, cfg: &ScenarioConfig, scfg: &SolverConfig) -> Result<SolveReport> {
    solve_with(ch, cfg, scfg, &SolveOptions::default())
}

pub fn solve_with(ch: &ChannelSet, cfg: &ScenarioConfig, scfg: &SolverConfig, opts: &SolveOptions) -> Result<SolveReport> {
    let started = Instant::now();
    cfg.validate()?;
    scfg.validate()?;
    ch.check_dims(cfg)?;
    if !ch.normalized {
        return Err(Error::ConfigInvalid("channels must be noise-normalized".into()));
    }
    let p_b = cfg.p_b_watts();
    let problem = Problem {
        ch,
        cfg,
        omega: cfg.omegas(),
        harvest: scfg.harvest_constraint,
    };

    let mut d = DesignPoint::initial(cfg.n_b, cfg.n_s, cfg.m_i);
    if let Some(phi) = &opts.initial_phi {
        if phi.len() != cfg.n_s {
            return Err(Error::DimensionMismatch("initial phase vector length".into()));
        }
        d.phi = project_phases(phi);
    }
    let mut eff = effective_channels(ch, &d.phi)?;
    let mut mu = scfg.mu0;
    let mut step_x = StepControl {
        next: scfg.delta_x0,
        grow: scfg.ls_grow,
    };
    let mut step_phi = StepControl {
        next: scfg.delta_phi0,
        grow: scfg.ls_grow,
    };
    let mut trace = Vec::new();
    let mut converged = false;
    let mut outer_rounds = 0;
    let mut inner_total = 0;
    let mut last_pen = PenaltyState { mu, rho: scfg.rho0 };

    for outer in 0..scfg.outer_max {
        let pen = PenaltyState {
            mu,
            rho: scfg.rho_at(outer),
        };
        last_pen = pen;
        outer_rounds = outer + 1;
        let mut ev = problem.eval(&eff, &d, &pen)?;
        if !ev.aug.is_finite() {
            return Err(Error::NumericalBreakdown("objective is not finite".into()));
        }
        trace.push(TraceRow {
            outer,
            inner: 0,
            aug_obj_nats: ev.aug,
            wsr_nats: ev.wsr,
            f: ev.f,
            rho: pen.rho,
            mu: pen.mu,
            step_x: 0.0,
            step_phi: 0.0,
        });

        for inner in 1..=scfg.inner_max {
            inner_total += 1;
            let previous = ev.aug;

            let gx = problem.grad_x(&eff, &d, &ev, &pen)?;
            let ls = line_search(step_x.next, scfg.ls_shrink, scfg.ls_max, ev.aug, |delta| {
                let x = ascend_x(&d.x, &gx, delta, p_b)?;
                let cand = DesignPoint {
                    x,
                    phi: d.phi.clone(),
                    tau: d.tau,
                };
                let e = problem.eval(&eff, &cand, &pen)?;
                Ok((e.aug, (cand, e)))
            })?;
            step_x.record(ls.step);
            let accepted_x = ls.step;
            if let Some((p, e)) = ls.point {
                d = p;
                ev = e;
            }

            let mut accepted_phi = 0.0;
            if opts.optimize_phi && cfg.n_s > 0 {
                let gp = problem.grad_phi(&eff, &d, &ev, &pen)?;
                let ls = line_search(step_phi.next, scfg.ls_shrink, scfg.ls_max, ev.aug, |delta| {
                    let phi = ascend_phi(&d.phi, &gp, delta);
                    let e = effective_channels(ch, &phi)?;
                    let cand = DesignPoint {
                        x: d.x.clone(),
                        phi,
                        tau: d.tau,
                    };
                    let v = problem.eval(&e, &cand, &pen)?;
                    Ok((v.aug, (cand, e, v)))
                })?;
                step_phi.record(ls.step);
                accepted_phi = ls.step;
                if let Some((p, e, v)) = ls.point {
                    d = p;
                    eff = e;
                    ev = v;
                }
            }

            if problem.harvest {
                d.tau = update_tau(ev.p_h, pen.mu, pen.rho);
                ev = problem.with_tau(ev, d.tau, &pen);
            }
            if !ev.aug.is_finite() {
                return Err(Error::NumericalBreakdown("objective is not finite".into()));
            }
            check_iterate(&d, p_b)?;
            trace.push(TraceRow {
                outer,
                inner,
                aug_obj_nats: ev.aug,
                wsr_nats: ev.wsr,
                f: ev.f,
                rho: pen.rho,
                mu: pen.mu,
                step_x: accepted_x,
                step_phi: accepted_phi,
            });
            if relative(ev.aug - previous, previous) < scfg.epsilon {
                break;
            }
        }

        // Stop on a small augmentation gap, and only once the residual
        // itself is within tolerance.
        let gap = relative(ev.aug - ev.wsr, ev.aug);
        if gap < scfg.epsilon && ev.f.abs() <= scfg.epsilon {
            converged = true;
            break;
        }
        mu += ev.f / pen.rho;
    }

    let ev = problem.eval(&eff, &d, &last_pen)?;
    let projected_gradient_norm = {
        let gx = problem.grad_x(&eff, &d, &ev, &last_pen)?;
        let moved = ascend_x(&d.x, &gx, 1.0, p_b)?;
        let mut acc: f64 = moved.iter().zip(&d.x).map(|(a, b)| frobenius(&(a - b)).powi(2)).sum();
        if opts.optimize_phi && cfg.n_s > 0 {
            let gp = problem.grad_phi(&eff, &d, &ev, &last_pen)?;
            acc += (ascend_phi(&d.phi, &gp, 1.0) - &d.phi).norm_squared();
        }
        acc.sqrt()
    };
    let harvest_ok = !problem.harvest || ev.p_h >= 1.0 - 1e-3;
    Ok(SolveReport {
        feasible: converged && harvest_ok,
        converged,
        wsr_nats: ev.wsr,
        wsr_bits: ev.wsr / std::f64::consts::LN_2,
        harvested_norm: ev.p_h,
        residual: ev.f,
        total_power: d.total_power(),
        outer_rounds,
        inner_iterations: inner_total,
        projected_gradient_norm,
        final_point: d,
        trace,
        wall_time: started.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_channels;
    use crate::objective::residual_f;
    use num_complex::Complex64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn channels(cfg: &ScenarioConfig) -> ChannelSet {
        generate_channels(cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap()
    }

    fn tau_part(tau: f64, p_h: f64, mu: f64, rho: f64) -> f64 {
        let f = 1.0 + tau - p_h;
        -mu * f - f * f / (2.0 * rho)
    }

    // Single-user capacity by SVD and bisection on the water level.
    pub(crate) fn waterfill_capacity(z: &CMatrix, p: f64) -> f64 {
        let gains: Vec<f64> = z.clone().svd(false, false).singular_values.iter().map(|s| s * s).filter(|&g| g > 1e-300).collect();
        let poured = |nu: f64| gains.iter().map(|g| (nu - 1.0 / g).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, p + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if poured(mid) > p {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        gains.iter().map(|g| (1.0 + g * (lo - 1.0 / g).max(0.0)).ln()).sum()
    }

    #[test]
    fn tau_examples() {
        assert!((update_tau(1.5, 0.0, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(update_tau(0.5, 0.0, 1.0), 0.0);
        assert!((update_tau(3.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn tau_matches_grid_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p_h = rng.random_range(0.0..8.0);
            let mu = rng.random_range(-2.0..2.0);
            let rho = rng.random_range(0.05..2.0);
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 0..=100_000 {
                let t = i as f64 * 1e-4;
                let v = tau_part(t, p_h, mu, rho);
                if v > best.1 {
                    best = (t, v);
                }
            }
            let tau = update_tau(p_h, mu, rho);
            if tau <= 10.0 {
                assert!((tau - best.0).abs() < 1e-3, "{p_h} {mu} {rho}: {tau} vs {}", best.0);
            }
        }
    }

    #[test]
    fn precoder_factorization() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = CMatrix::from_fn(4, 3, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let x = &a * a.adjoint();
        let f = factor_precoders(&x).unwrap();
        assert!(frobenius(&(&f * f.adjoint() - &x)) < 1e-9);

        let zero = CMatrix::zeros(3, 3);
        assert!(frobenius(&factor_precoders(&zero).unwrap()) == 0.0);

        let indefinite = CMatrix::from_diagonal(&CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-0.5, 0.0)]));
        assert!(matches!(factor_precoders(&indefinite), Err(Error::NonPsd { .. })));
    }

    #[test]
    fn line_search_on_concave_quadratic() {
        // q(t) = -(t - t*)², maximised at t*; starting from 0 with q(0) = -t*²
        for &t_star in &[0.01, 0.3, 0.77, 1.0, 5.0] {
            let q = |t: f64| -(t - t_star) * (t - t_star);
            let out = line_search(1.0, 0.5, 30, q(0.0), |t| Ok((q(t), t))).unwrap();
            assert!(out.value >= q(0.0));
            // the first accepted halving from 1 lies within [t*·shrink, 2t*]
            if t_star < 0.5 {
                assert!(out.step >= 0.5 * t_star && out.step <= 2.0 * t_star, "{t_star}: {}", out.step);
            }
        }
    }

    #[test]
    fn line_search_at_stationary_point() {
        let out = line_search(1.0, 0.5, 30, 0.0, |t: f64| Ok((-t * t, ()))).unwrap();
        assert_eq!(out.step, 0.0);
        assert!(out.point.is_none());
        assert_eq!(out.evaluations, 31);
    }

    #[test]
    fn line_search_rejects_non_finite() {
        let out = line_search(1.0, 0.5, 5, 0.0, |t: f64| Ok((if t > 0.3 { f64::NAN } else { t }, t))).unwrap();
        assert_eq!(out.step, 0.25);
    }

    #[test]
    fn rho_schedule() {
        let s = SolverConfig::default();
        assert_eq!(s.rho_at(0), s.rho0);
        assert!((s.rho_at(3) - s.rho0 * 1e-3).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::from_json(r#"{"kappa": 1.5}"#).is_err());
        assert!(SolverConfig::from_json(r#"{"rho0": 0}"#).is_err());
        assert!(SolverConfig::from_json(r#"{"bogus": 1}"#).is_err());
        let s = SolverConfig::from_json(r#"{"epsilon": 1e-4}"#).unwrap();
        assert_eq!(s.epsilon, 1e-4);
        assert_eq!(s.ls_max, 30);
    }

    #[test]
    fn default_scenario_trace() {
        let cfg = ScenarioConfig::default();
        let ch = channels(&cfg);
        let scfg = SolverConfig::default();
        let r = solve(&ch, &cfg, &scfg).unwrap();
        assert!(r.converged && r.feasible);
        for w in r.trace.windows(2) {
            if w[1].inner > 0 {
                assert_eq!(w[0].outer, w[1].outer);
                assert!(w[1].aug_obj_nats >= w[0].aug_obj_nats - 1e-12);
            } else {
                assert_eq!(w[1].outer, w[0].outer + 1);
            }
        }
        for row in &r.trace {
            assert_eq!(row.rho, scfg.rho_at(row.outer));
        }
        assert!(r.residual.abs() <= scfg.epsilon * (1.0 + r.wsr_nats.abs()));
        assert!(r.total_power <= cfg.p_b_watts() * (1.0 + 1e-6));
        assert!(r.final_point.phi.iter().all(|p| (p.norm() - 1.0).abs() < 1e-9));
        assert!(r.harvested_norm >= 1.0 - 1e-3);
        let eff = effective_channels(&ch, &r.final_point.phi).unwrap();
        assert!((residual_f(&eff, &r.final_point, &cfg) - r.residual).abs() < 1e-12);
    }

    #[test]
    fn solve_is_deterministic() {
        let cfg = ScenarioConfig { seed: 11, ..Default::default() };
        let ch = channels(&cfg);
        let a = solve(&ch, &cfg, &SolverConfig::default()).unwrap();
        let b = solve(&ch, &cfg, &SolverConfig::default()).unwrap();
        assert_eq!(a.wsr_nats.to_bits(), b.wsr_nats.to_bits());
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn unreachable_threshold_is_infeasible() {
        let mut cfg = ScenarioConfig::default();
        cfg.p_th_mw *= 1e6;
        let ch = channels(&cfg);
        let r = solve(&ch, &cfg, &SolverConfig::default()).unwrap();
        assert!(!r.feasible);
        assert!(r.total_power <= cfg.p_b_watts() * (1.0 + 1e-6));
    }

    #[test]
    fn single_user_matches_waterfilling() {
        let cfg = ScenarioConfig { m_i: 1, seed: 2, ..Default::default() };
        let ch = channels(&cfg);
        let scfg = SolverConfig { harvest_constraint: false, ..Default::default() };
        let r = solve(&ch, &cfg, &scfg).unwrap();
        let eff = effective_channels(&ch, &r.final_point.phi).unwrap();
        let cap = waterfill_capacity(&eff.z[0], cfg.p_b_watts());
        assert!(((r.wsr_nats - cap) / cap).abs() < 1e-3, "{} vs {cap}", r.wsr_nats);
    }

    #[test]
    fn fixed_phase_keeps_phases() {
        let cfg = ScenarioConfig::default();
        let ch = channels(&cfg);
        let phi = CVector::from_fn(cfg.n_s, |i, _| Complex64::from_polar(1.0, i as f64));
        let opts = SolveOptions { initial_phi: Some(phi.clone()), optimize_phi: false };
        let r = solve_with(&ch, &cfg, &SolverConfig::default(), &opts).unwrap();
        assert!((&r.final_point.phi - &phi).norm() < 1e-12);
    }

    #[test]
    fn bad_initial_phase_length() {
        let cfg = ScenarioConfig::default();
        let ch = channels(&cfg);
        let opts = SolveOptions { initial_phi: Some(CVector::zeros(3)), optimize_phi: true };
        assert!(matches!(solve_with(&ch, &cfg, &SolverConfig::default(), &opts), Err(Error::DimensionMismatch(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn tau_is_optimal_and_nonnegative(p_h in 0.0..10.0f64, mu in -3.0..3.0f64, rho in 0.01..5.0f64, dt in -1.0..1.0f64) {
            let tau = update_tau(p_h, mu, rho);
            prop_assert!(tau >= 0.0);
            let other = (tau + dt).max(0.0);
            prop_assert!(tau_part(tau, p_h, mu, rho) >= tau_part(other, p_h, mu, rho) - 1e-12);
        }

        #[test]
        fn precoder_reconstructs(seed in any::<u64>(), n in 1usize..6, r in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = CMatrix::from_fn(n, r, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let x = &a * a.adjoint();
            let f = factor_precoders(&x).unwrap();
            prop_assert!(frobenius(&(&f * f.adjoint() - &x)) <= 1e-9);
        }
    }
}
