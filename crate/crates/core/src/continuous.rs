//! The inertial system with vanishing damping and operator correction,
//!
//! ```text
//! z̈ + (α/t)ż + β(t)·d/dt V(z) + ½(β̇(t) + αβ(t)/t)V(z) = 0,
//! ```
//!
//! integrated in its first-order form on `(z, u)`:
//!
//! ```text
//! ż = u/(2t) − (α−1)z/t − β(t)V(z)
//! u̇ = (tβ̇(t) + (2−α)β(t))V(z)
//! ```
//!
//! which needs no derivative of `t ↦ V(z(t))`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, Vector};
use crate::operator::MonotoneOperator;
use crate::problem::fmt17;
use crate::solvers::BetaKind;

/// `β(t) = β₀·t^ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaFunction {
    pub kind: BetaKind,
    pub beta0: f64,
    pub rho: f64,
}

impl BetaFunction {
    pub fn constant(beta0: f64) -> Result<Self> {
        Self::build(BetaKind::Constant, beta0, 0.0)
    }

    pub fn polynomial(beta0: f64, rho: f64) -> Result<Self> {
        Self::build(BetaKind::Polynomial, beta0, rho)
    }

    fn build(kind: BetaKind, beta0: f64, rho: f64) -> Result<Self> {
        if !(beta0 > 0.0 && beta0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "beta0 must be positive, got {beta0}"
            )));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "rho must be nonnegative, got {rho}"
            )));
        }
        Ok(Self { kind, beta0, rho })
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            BetaKind::Constant => self.beta0,
            BetaKind::Polynomial => self.beta0 * t.powf(self.rho),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.kind {
            BetaKind::Constant => 0.0,
            BetaKind::Polynomial if self.rho == 0.0 => 0.0,
            BetaKind::Polynomial => self.beta0 * self.rho * t.powf(self.rho - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthCheck {
    pub pass: bool,
    /// `(α − 2) − ρ`
    pub margin: f64,
}

/// `tβ̇ ≤ (α−2)β` (or `<` when `strict`). For the polynomial family this is
/// `ρ ≤ α − 2`.
pub fn check_growth(alpha: f64, beta: &BetaFunction, strict: bool) -> GrowthCheck {
    let rho = match beta.kind {
        BetaKind::Constant => 0.0,
        BetaKind::Polynomial => beta.rho,
    };
    let margin = (alpha - 2.0) - rho;
    let pass = if strict { margin > 0.0 } else { margin >= 0.0 };
    GrowthCheck { pass, margin }
}

/// `w(t) = ½((α−2)β(t)/t − β̇(t))`.
pub fn w_coefficient(t: f64, alpha: f64, beta: &BetaFunction) -> f64 {
    0.5 * ((alpha - 2.0) * beta.value(t) / t - beta.derivative(t))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousState {
    pub t: f64,
    pub z: Vector,
    /// `u = 2(α−1)z + 2tż + 2tβ(t)V(z)`
    pub u: Vector,
}

impl ContinuousState {
    /// State at time `t` with position `z`, velocity `zdot` and `vz = V(z)`.
    pub fn from_velocity(t: f64, z: Vector, zdot: &Vector, vz: &Vector, alpha: f64, beta: &BetaFunction) -> Self {
        let u = 2.0 * (alpha - 1.0) * &z + 2.0 * t * zdot + 2.0 * t * beta.value(t) * vz;
        Self { t, z, u }
    }

    /// `ż = u/(2t) − (α−1)z/t − β(t)V(z)`
    pub fn velocity(&self, vz: &Vector, alpha: f64, beta: &BetaFunction) -> Vector {
        let t = self.t;
        &self.u / (2.0 * t) - ((alpha - 1.0) / t) * &self.z - beta.value(t) * vz
    }
}

/// Right-hand side `(ż, u̇)` of the first-order system.
pub fn ode_rhs<O: MonotoneOperator + ?Sized>(
    state: &ContinuousState,
    alpha: f64,
    beta: &BetaFunction,
    op: &O,
) -> Result<(Vector, Vector)> {
    let t = state.t;
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
    }
    let vz = op.apply(&state.z);
    let dz = state.velocity(&vz, alpha, beta);
    let du = (t * beta.derivative(t) + (2.0 - alpha) * beta.value(t)) * vz;
    Ok((dz, du))
}

/// `E_λ(t) = ½‖2λ(z−z*) + t(2ż + βV)‖² + 2λ(α−1−λ)‖z−z*‖²
///          + 2λtβ⟨z−z*, V⟩ + ½t²β²‖V‖²`
#[allow(clippy::too_many_arguments)]
pub fn energy_continuous(
    t: f64,
    z: &Vector,
    zdot: &Vector,
    vz: &Vector,
    alpha: f64,
    beta: &BetaFunction,
    lambda: f64,
    z_star: &Vector,
) -> Result<f64> {
    if !(0.0..=alpha - 1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!(
            "lambda must lie in [0, alpha - 1] = [0, {}], got {lambda}",
            alpha - 1.0
        )));
    }
    let b = beta.value(t);
    let d = z - z_star;
    let head = 2.0 * lambda * &d + t * (2.0 * zdot + b * vz);
    Ok(0.5 * head.norm_squared()
        + 2.0 * lambda * (alpha - 1.0 - lambda) * d.norm_squared()
        + 2.0 * lambda * t * b * d.dot(vz)
        + 0.5 * (t * b).powi(2) * vz.norm_squared())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateConfig {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub alpha: f64,
    pub beta: BetaFunction,
    /// Keep every `sample_every`-th step (the endpoints are always kept).
    pub sample_every: usize,
    /// Solution used for the energy; without it the energy column is absent.
    pub z_star: Option<Vector>,
    /// Residual of `z_star`; energies are flagged untrusted above `1e-9`.
    pub z_star_residual: f64,
}

impl IntegrateConfig {
    /// `t₀ = 1`, `dt = 1e-3`, constant `β ≡ 1`, every step sampled.
    pub fn new(t_end: f64, alpha: f64) -> Self {
        Self {
            t0: 1.0,
            t_end,
            dt: 1e-3,
            alpha,
            beta: BetaFunction::constant(1.0).expect("positive"),
            sample_every: 1,
            z_star: None,
            z_star_residual: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub z: Vector,
    pub zdot: Vector,
    pub residual: f64,
    /// `E_{α−1}(t)`
    pub energy: Option<f64>,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTrajectory {
    pub samples: Vec<Sample>,
    pub config: IntegrateConfig,
    /// False when the reference behind the energy is not accurate enough.
    pub energy_trusted: bool,
}

pub const TRAJECTORY_HEADER: &str = "t,residual,velocity,energy,w";

impl ContinuousTrajectory {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let c = &self.config;
        let _ = writeln!(
            s,
            "# alpha = {}\n# beta = {:?} {} {}\n# t0 = {}\n# dt = {}\n# energy_trusted = {}",
            c.alpha, c.beta.kind, c.beta.beta0, c.beta.rho, c.t0, c.dt, self.energy_trusted
        );
        let _ = writeln!(s, "{TRAJECTORY_HEADER}");
        for p in &self.samples {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                fmt17(p.t),
                fmt17(p.residual),
                fmt17(p.zdot.norm()),
                p.energy.map(fmt17).unwrap_or_default(),
                fmt17(p.w)
            );
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn axpy_state(base: &ContinuousState, h: f64, dz: &Vector, du: &Vector) -> ContinuousState {
    ContinuousState {
        t: base.t + h,
        z: &base.z + h * dz,
        u: &base.u + h * du,
    }
}

/// Classical fourth-order Runge–Kutta with fixed step on `(z, u)`, started
/// from `u(t₀) = 2(α−1)z⁰ + 2t₀ż⁰ + 2t₀β(t₀)V(z⁰)`.
pub fn integrate<O: MonotoneOperator + ?Sized>(
    op: &O,
    z0: &Vector,
    zdot0: &Vector,
    cfg: &IntegrateConfig,
) -> Result<ContinuousTrajectory> {
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {}", cfg.dt)));
    }
    if !(cfg.t0 > 0.0 && cfg.t_end >= cfg.t0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < t0 <= t_end, got t0 = {}, t_end = {}",
            cfg.t0, cfg.t_end
        )));
    }
    if !(cfg.alpha > 2.0) {
        return Err(Error::Config(format!("alpha must exceed 2, got {}", cfg.alpha)));
    }
    if cfg.sample_every == 0 {
        return Err(Error::InvalidArgument("sample_every must be positive".into()));
    }
    let growth = check_growth(cfg.alpha, &cfg.beta, false);
    if !growth.pass {
        return Err(Error::Config(format!(
            "growth condition fails: margin {}",
            growth.margin
        )));
    }
    let dim = op.dim();
    for (name, v) in [("z0", Some(z0)), ("zdot0", Some(zdot0)), ("z_star", cfg.z_star.as_ref())] {
        if let Some(v) = v {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{name} has length {} but the operator has dimension {dim}",
                    v.len()
                )));
            }
        }
    }
    let (alpha, beta) = (cfg.alpha, &cfg.beta);
    let steps = ((cfg.t_end - cfg.t0) / cfg.dt).round() as usize;
    let v0 = op.apply(z0);
    let mut state = ContinuousState::from_velocity(cfg.t0, z0.clone(), zdot0, &v0, alpha, beta);

    let sample = |state: &ContinuousState| -> Result<Sample> {
        let vz = op.apply(&state.z);
        let zdot = state.velocity(&vz, alpha, beta);
        let energy = match &cfg.z_star {
            Some(zs) => Some(energy_continuous(
                state.t, &state.z, &zdot, &vz, alpha, beta, alpha - 1.0, zs,
            )?),
            None => None,
        };
        Ok(Sample {
            t: state.t,
            z: state.z.clone(),
            zdot,
            residual: vz.norm(),
            energy,
            w: w_coefficient(state.t, alpha, beta),
        })
    };

    let mut samples = vec![sample(&state)?];
    let h = cfg.dt;
    for i in 1..=steps {
        let (k1z, k1u) = ode_rhs(&state, alpha, beta, op)?;
        let (k2z, k2u) = ode_rhs(&axpy_state(&state, 0.5 * h, &k1z, &k1u), alpha, beta, op)?;
        let (k3z, k3u) = ode_rhs(&axpy_state(&state, 0.5 * h, &k2z, &k2u), alpha, beta, op)?;
        let (k4z, k4u) = ode_rhs(&axpy_state(&state, h, &k3z, &k3u), alpha, beta, op)?;
        state.z += (h / 6.0) * (k1z + 2.0 * k2z + 2.0 * k3z + k4z);
        state.u += (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
        state.t = cfg.t0 + i as f64 * h;
        if !all_finite(&state.z) || !all_finite(&state.u) {
            return Err(Error::Divergence {
                k: i,
                last_finite: i - 1,
            });
        }
        if i % cfg.sample_every == 0 || i == steps {
            samples.push(sample(&state)?);
        }
    }
    Ok(ContinuousTrajectory {
        samples,
        config: cfg.clone(),
        energy_trusted: cfg.z_star.is_some() && cfg.z_star_residual <= 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Operator;

    fn beta1() -> BetaFunction {
        BetaFunction::constant(1.0).unwrap()
    }

    #[test]
    fn energy_hand_value() {
        let one = Vector::from_element(1, 1.0);
        let e = energy_continuous(1.0, &one, &Vector::zeros(1), &one, 3.0, &beta1(), 1.0, &Vector::zeros(1))
            .unwrap();
        assert!((e - 9.0).abs() < 1e-14);
        assert!(energy_continuous(1.0, &one, &one, &one, 3.0, &beta1(), 2.5, &one).is_err());
    }

    #[test]
    fn w_hand_values() {
        assert!((w_coefficient(2.0, 3.0, &beta1()) - 0.25).abs() < 1e-15);
        let lin = BetaFunction::polynomial(1.0, 1.0).unwrap();
        assert!((w_coefficient(7.0, 4.0, &lin) - 0.5).abs() < 1e-15);
        let edge = BetaFunction::polynomial(1.0, 1.5).unwrap();
        assert!(w_coefficient(3.3, 3.5, &edge).abs() < 1e-14);
    }

    #[test]
    fn growth_checks() {
        let sq = BetaFunction::polynomial(1.0, 2.0).unwrap();
        assert!(!check_growth(4.0, &sq, true).pass);
        assert!(check_growth(4.0, &sq, false).pass);
        let c = check_growth(3.0, &beta1(), true);
        assert!(c.pass && c.margin == 1.0);
        let lin = check_growth(3.5, &BetaFunction::polynomial(1.0, 1.0).unwrap(), true);
        assert!(lin.pass && (lin.margin - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rhs_at_equilibrium_and_constant_beta() {
        let op = Operator::identity(2);
        let st = ContinuousState {
            t: 2.0,
            z: Vector::zeros(2),
            u: Vector::zeros(2),
        };
        let (dz, du) = ode_rhs(&st, 3.0, &beta1(), &op).unwrap();
        assert_eq!(dz.norm() + du.norm(), 0.0);
        let st = ContinuousState {
            t: 1.0,
            z: Vector::from_element(2, 1.0),
            u: Vector::from_element(2, 4.0),
        };
        let (_, du) = ode_rhs(&st, 3.0, &beta1(), &op).unwrap();
        assert_eq!(du, -op.apply(&st.z));
        let bad = ContinuousState { t: 0.0, ..st };
        assert!(ode_rhs(&bad, 3.0, &beta1(), &op).is_err());
    }

    #[test]
    fn velocity_round_trip() {
        let z = Vector::from_element(1, 1.0);
        let zdot = Vector::from_element(1, -0.3);
        let vz = z.clone();
        let st = ContinuousState::from_velocity(1.0, z, &zdot, &vz, 3.0, &beta1());
        assert!((st.velocity(&vz, 3.0, &beta1()) - zdot).norm() < 1e-15);
    }

    #[test]
    fn zero_operator_keeps_position() {
        let op = Operator::zero(2);
        let z0 = Vector::from_vec(vec![1.0, -1.0]);
        let mut cfg = IntegrateConfig::new(3.0, 3.0);
        cfg.z_star = Some(z0.clone());
        let tr = integrate(&op, &z0, &Vector::zeros(2), &cfg).unwrap();
        assert_eq!(tr.samples.len(), 2001);
        for s in &tr.samples {
            assert!((&s.z - &z0).norm() < 1e-14);
            assert!(s.energy.unwrap().abs() < 1e-20);
        }
    }

    #[test]
    fn integrate_rejects_bad_input() {
        let op = Operator::identity(1);
        let z = Vector::zeros(1);
        let mut cfg = IntegrateConfig::new(2.0, 3.0);
        cfg.dt = 0.0;
        assert!(integrate(&op, &z, &z, &cfg).is_err());
        let mut cfg = IntegrateConfig::new(2.0, 3.0);
        cfg.beta = BetaFunction::polynomial(1.0, 2.0).unwrap();
        assert!(integrate(&op, &z, &z, &cfg).is_err());
    }
}
