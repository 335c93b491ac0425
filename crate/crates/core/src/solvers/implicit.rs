//! Implicit Fast OGDA and the resolvent it needs.

use nalgebra::LU;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::operator::MonotoneOperator;

use super::config::{BetaSchedule, SolverConfig};
use super::log::{IterateLog, Recorder};

/// Inner iteration cap for non-affine resolvents.
pub const INNER_CAP: usize = 10_000;

/// `(s_k, t_k)` with `s_k = s(αβ_k + k(β_k − β_{k−1}))/(2(k+α))` and
/// `t_k = skβ_{k−1}/(k+α)`.
pub fn implicit_coefficients(k: usize, alpha: f64, s: f64, beta: &BetaSchedule) -> (f64, f64) {
    let kf = k as f64;
    let (b, bp) = (beta.at(k), beta.at(k.saturating_sub(1)));
    let ka = kf + alpha;
    let sk = s * (alpha * b + kf * (b - bp)) / (2.0 * ka);
    let tk = s * kf * bp / ka;
    (sk, tk)
}

/// Solution of `z + cV(z) = anchor` with its operator value and residual.
#[derive(Debug, Clone)]
pub struct ResolventPoint {
    pub z: Vector,
    pub vz: Vector,
    pub residual: f64,
}

/// Resolvent evaluator with a cached factorization of `I + cM` for affine
/// operators. The factorization is rebuilt when `c` moves by more than a
/// relative `1e-12`.
#[derive(Default)]
pub struct Resolvent {
    cached: Option<(f64, LU<f64, nalgebra::Dyn, nalgebra::Dyn>)>,
    factorizations: usize,
}

impl Resolvent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    pub fn solve<O: MonotoneOperator + ?Sized>(
        &mut self,
        op: &O,
        c: f64,
        anchor: &Vector,
        tol: f64,
    ) -> Result<ResolventPoint> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "resolvent parameter must be positive, got {c}"
            )));
        }
        if anchor.len() != op.dim() {
            return Err(Error::DimensionMismatch(format!(
                "anchor has length {} but the operator has dimension {}",
                anchor.len(),
                op.dim()
            )));
        }
        match op.affine() {
            Some(map) => {
                let stale = self
                    .cached
                    .as_ref()
                    .is_none_or(|(cc, _)| (c - cc).abs() > 1e-12 * cc);
                if stale {
                    let n = map.dim();
                    let sys = Matrix::identity(n, n) + c * map.matrix();
                    self.cached = Some((c, sys.lu()));
                    self.factorizations += 1;
                }
                let (cc, lu) = self.cached.as_ref().expect("factorization cached above");
                let rhs = anchor - *cc * map.offset();
                let mut z = lu.solve(&rhs).ok_or(Error::Resolvent {
                    step: None,
                    best_residual: f64::INFINITY,
                })?;
                let mut vz = op.apply(&z);
                let mut residual = (&z + c * &vz - anchor).norm();
                if residual > tol {
                    // One refinement sweep against the exact c.
                    let r = &z + c * &vz - anchor;
                    if let Some(dz) = lu.solve(&r) {
                        let cand = &z - dz;
                        let vc = op.apply(&cand);
                        let rc = (&cand + c * &vc - anchor).norm();
                        if rc < residual {
                            (z, vz, residual) = (cand, vc, rc);
                        }
                    }
                }
                if residual <= tol {
                    Ok(ResolventPoint { z, vz, residual })
                } else {
                    Err(Error::Resolvent {
                        step: None,
                        best_residual: residual,
                    })
                }
            }
            None => forward_resolvent(op, c, anchor, tol),
        }
    }
}

/// Relaxed forward iteration `z ← z − ηF(z)` on the 1-strongly monotone
/// `F(z) = z + cV(z) − anchor`. Uses `η = 1/(1+cL)²` when `L` is known,
/// otherwise starts at `η = 1` and halves on every residual increase.
fn forward_resolvent<O: MonotoneOperator + ?Sized>(
    op: &O,
    c: f64,
    anchor: &Vector,
    tol: f64,
) -> Result<ResolventPoint> {
    let fixed = op.lipschitz().map(|l| 1.0 / (1.0 + c * l).powi(2));
    let mut eta = fixed.unwrap_or(1.0);
    let mut z = anchor.clone();
    let mut vz = op.apply(&z);
    let mut f = &z + c * &vz - anchor;
    let mut residual = f.norm();
    for _ in 0..INNER_CAP {
        if residual <= tol {
            return Ok(ResolventPoint { z, vz, residual });
        }
        let cand = &z - eta * &f;
        let vc = op.apply(&cand);
        let fc = &cand + c * &vc - anchor;
        let rc = fc.norm();
        if fixed.is_none() && !(rc < residual) {
            eta *= 0.5;
            if eta < 1e-300 {
                break;
            }
            continue;
        }
        (z, vz, f, residual) = (cand, vc, fc, rc);
    }
    if residual <= tol {
        Ok(ResolventPoint { z, vz, residual })
    } else {
        Err(Error::Resolvent {
            step: None,
            best_residual: residual,
        })
    }
}

/// `(I + cV)⁻¹(anchor)` to residual `tol`.
pub fn resolvent_solve<O: MonotoneOperator + ?Sized>(
    op: &O,
    c: f64,
    anchor: &Vector,
    tol: f64,
) -> Result<Vector> {
    Resolvent::new().solve(op, c, anchor, tol).map(|p| p.z)
}

/// Implicit Fast OGDA:
///
/// ```text
/// z^{k+1} = (I + (s_k+t_k)V)⁻¹(z^k + (1 − α/(k+α))(z^k − z^{k−1}) + t_k V(z^k))
/// ```
///
/// The inner tolerance is `1e-12(1 + ‖anchor‖)`.
pub fn run_fast_ogda_implicit<O: MonotoneOperator + ?Sized>(
    op: &O,
    cfg: &SolverConfig,
    beta: &BetaSchedule,
) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    cfg.require_alpha()?;
    beta.check_growth(cfg.alpha)?;
    let mut rec = Recorder::new("fast-ogda-implicit", cfg);
    let mut resolvent = Resolvent::new();
    let (alpha, s) = (cfg.alpha, cfg.step);
    let mut evals = 0;

    let mut z_prev = cfg.z0.clone();
    let v0 = op.apply(&z_prev);
    evals += 1;
    if rec.record(0, &z_prev, None, &v0, None, None)? || cfg.cap() == 0 {
        return Ok(rec.finish(z_prev, evals, 0));
    }
    let mut z = cfg.start1().clone();
    let mut vz = op.apply(&z);
    evals += 1;
    for k in 1..=cfg.cap() {
        if rec.record(k, &z, Some(&z_prev), &vz, None, None)? || k == cfg.cap() {
            break;
        }
        let (sk, tk) = implicit_coefficients(k, alpha, s, beta);
        let ka = k as f64 + alpha;
        let anchor = &z + (1.0 - alpha / ka) * (&z - &z_prev) + tk * &vz;
        let tol = 1e-12 * (1.0 + anchor.norm());
        let point = resolvent
            .solve(op, sk + tk, &anchor, tol)
            .map_err(|e| match e {
                Error::Resolvent { best_residual, .. } => Error::Resolvent {
                    step: Some(k),
                    best_residual,
                },
                other => other,
            })?;
        evals += 1;
        rec.step_residual(point.residual);
        z_prev = std::mem::replace(&mut z, point.z);
        vz = point.vz;
    }
    Ok(rec.finish(z, evals, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Operator;

    #[test]
    fn coefficient_hand_values() {
        let b = BetaSchedule::constant(1.0).unwrap();
        let (s1, t1) = implicit_coefficients(1, 3.0, 1.0, &b);
        assert!((s1 - 0.375).abs() < 1e-15);
        assert!((t1 - 0.25).abs() < 1e-15);
        let (sk, tk) = implicit_coefficients(1_000_000, 3.0, 2.0, &b);
        assert!(sk < 1e-5);
        assert!((tk - 2.0).abs() < 1e-5);
    }

    #[test]
    fn coefficients_follow_schedule_differences() {
        let b = BetaSchedule::polynomial(1.0, 1.0).unwrap();
        for k in 1..20 {
            let (sk, tk) = implicit_coefficients(k, 4.0, 1.0, &b);
            let kf = k as f64;
            let diff = b.at(k) - b.at(k - 1);
            assert!((sk - (4.0 * kf + kf * diff) / (2.0 * (kf + 4.0))).abs() < 1e-14);
            assert!((tk - kf * b.at(k - 1) / (kf + 4.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn resolvent_hand_values() {
        let z = resolvent_solve(&Operator::identity(1), 1.0, &Vector::from_element(1, 1.0), 1e-14)
            .unwrap();
        assert!((z[0] - 0.5).abs() < 1e-15);
        let z = resolvent_solve(
            &Operator::rotation(),
            1.0,
            &Vector::from_vec(vec![1.0, 0.0]),
            1e-14,
        )
        .unwrap();
        // x + y = 1 and y − x = 0.
        assert!((z[0] - 0.5).abs() < 1e-15 && (z[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn forward_resolvent_paths() {
        let cubic = Operator::from_fn(2, |z| z.map(|v| v * v * v + v));
        let anchor = Vector::from_vec(vec![1.0, -0.5]);
        let z = resolvent_solve(&cubic, 0.7, &anchor, 1e-12).unwrap();
        let f = &z + 0.7 * cubic.apply(&z) - &anchor;
        assert!(f.norm() <= 1e-12);

        let lin = Operator::from_fn(2, |z| Vector::from_vec(vec![z[1], -z[0]]))
            .with_lipschitz(1.0)
            .unwrap();
        let z = resolvent_solve(&lin, 1.0, &Vector::from_vec(vec![1.0, 0.0]), 1e-12).unwrap();
        assert!((z[0] - 0.5).abs() < 1e-11 && (z[1] - 0.5).abs() < 1e-11);
    }

    #[test]
    fn implicit_hand_trace() {
        let op = Operator::identity(1);
        let b = BetaSchedule::constant(1.0).unwrap();
        let cfg = SolverConfig::new(Vector::from_element(1, 1.0), 1.0).k_max(2);
        let log = run_fast_ogda_implicit(&op, &cfg, &b).unwrap();
        assert!((log.final_iterate[0] - 1.25 / 1.625).abs() < 1e-12);
        assert_eq!(log.step_residuals.len(), 1);
    }

    #[test]
    fn implicit_rejects_growth_violation() {
        let op = Operator::identity(1);
        let b = BetaSchedule::polynomial(1.0, 1.0).unwrap();
        let cfg = SolverConfig::new(Vector::from_element(1, 1.0), 1.0).alpha(3.0);
        assert!(run_fast_ogda_implicit(&op, &cfg, &b).is_err());
    }
}
