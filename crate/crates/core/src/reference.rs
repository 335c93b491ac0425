//! Reference solutions and solution-quality metrics.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operator::MonotoneOperator;
use crate::solvers::{run_eg, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefMethod {
    DirectLinear,
    LongRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRef {
    pub z_star: Vector,
    /// `‖V(z_star)‖`
    pub residual: f64,
    pub method: RefMethod,
}

/// Iteration cap of the extragradient fallback.
pub const LONG_RUN_CAP: usize = 1_000_000;

/// A zero of `op`: direct solve of `Mz = −q` for nonsingular affine
/// operators (with two refinement sweeps), otherwise extragradient with step
/// `0.5/L` from the origin until `‖V(z)‖ ≤ tol`.
pub fn reference_solution<O: MonotoneOperator + ?Sized>(op: &O, tol: f64) -> Result<SolutionRef> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tol must be positive, got {tol}")));
    }
    let mut best = f64::INFINITY;
    if let Some(map) = op.affine() {
        let lu = map.matrix().clone().lu();
        if let Some(mut z) = lu.solve(&(-map.offset())) {
            for _ in 0..2 {
                let r = op.apply(&z);
                if let Some(dz) = lu.solve(&r) {
                    z -= dz;
                }
            }
            let residual = op.apply(&z).norm();
            if residual.is_finite() && residual <= tol {
                return Ok(SolutionRef {
                    z_star: z,
                    residual,
                    method: RefMethod::DirectLinear,
                });
            }
            if residual.is_finite() {
                best = residual;
            }
        }
    }
    let l = match op.lipschitz() {
        Some(l) if l > 0.0 => l,
        Some(_) => {
            // V is constant; it has a zero only if that constant is zero.
            let residual = op.apply(&Vector::zeros(op.dim())).norm();
            if residual <= tol {
                return Ok(SolutionRef {
                    z_star: Vector::zeros(op.dim()),
                    residual,
                    method: RefMethod::LongRun,
                });
            }
            return Err(Error::NoReference {
                best_residual: best.min(residual),
            });
        }
        None => {
            return Err(Error::Config(
                "reference solution of a non-affine operator needs a Lipschitz bound".into(),
            ))
        }
    };
    // Chunked so the absolute tolerance is checked along the way.
    let chunk = 10_000;
    let mut z = Vector::zeros(op.dim());
    let mut found: Option<(Vector, f64)> = None;
    for _ in 0..LONG_RUN_CAP / chunk {
        let cfg = SolverConfig::new(z, 0.5 / l).k_max(chunk);
        let Ok(log) = run_eg(op, &cfg) else {
            break;
        };
        best = log.records.iter().map(|r| r.residual).fold(best, f64::min);
        z = log.final_iterate;
        let residual = op.apply(&z).norm();
        if residual <= tol {
            found = Some((z, residual));
            break;
        }
    }
    match found {
        Some((z_star, residual)) => Ok(SolutionRef {
            z_star,
            residual,
            method: RefMethod::LongRun,
        }),
        None => Err(Error::NoReference {
            best_residual: best,
        }),
    }
}

pub(crate) fn gap_value(z: &Vector, z_star: &Vector, delta0: f64, vz: &Vector) -> f64 {
    (z - z_star).dot(vz) + delta0 * vz.norm()
}

/// `⟨z − z*, V(z)⟩ + δ₀‖V(z)‖`, an upper bound on the restricted gap over the
/// ball of radius `δ₀ = ‖z⁰ − z*‖` around `z*`.
pub fn gap_surrogate(z: &Vector, reference: &SolutionRef, delta0: f64, vz: &Vector) -> f64 {
    gap_value(z, &reference.z_star, delta0, vz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Operator;
    use crate::problem::{build_ouyang_xu, saddle_operator};
    use crate::linalg::Matrix;

    #[test]
    fn identity_reference_is_origin() {
        let r = reference_solution(&Operator::identity(3), 1e-12).unwrap();
        assert_eq!(r.z_star, Vector::zeros(3));
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.method, RefMethod::DirectLinear);
    }

    #[test]
    fn rotation_reference_by_direct_solve() {
        let r = reference_solution(&Operator::rotation(), 1e-12).unwrap();
        assert_eq!(r.method, RefMethod::DirectLinear);
        assert!(r.z_star.norm() == 0.0);
    }

    #[test]
    fn structured_reference_is_accurate() {
        let op = saddle_operator(&build_ouyang_xu(3).unwrap(), None).unwrap();
        let r = reference_solution(&op, 1e-10).unwrap();
        assert!(r.residual <= 1e-10);
        assert_eq!(r.method, RefMethod::DirectLinear);
    }

    #[test]
    fn singular_consistent_system_uses_long_run() {
        // Projection onto the first axis, zero at any (1, t).
        let m = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let op = Operator::affine(m, Vector::from_vec(vec![-1.0, 0.0])).unwrap();
        let r = reference_solution(&op, 1e-9).unwrap();
        assert_eq!(r.method, RefMethod::LongRun);
        assert!(r.residual <= 1e-9);
    }

    #[test]
    fn inconsistent_system_has_no_reference() {
        let op = Operator::affine(Matrix::zeros(2, 2), Vector::from_vec(vec![1.0, 0.0])).unwrap();
        match reference_solution(&op, 1e-9) {
            Err(Error::NoReference { best_residual }) => assert!(best_residual >= 1.0 - 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gap_surrogate_hand_values() {
        let r = SolutionRef {
            z_star: Vector::zeros(1),
            residual: 0.0,
            method: RefMethod::DirectLinear,
        };
        let one = Vector::from_element(1, 1.0);
        assert_eq!(gap_surrogate(&one, &r, 1.0, &one), 2.0);
        assert_eq!(gap_surrogate(&r.z_star, &r, 1.0, &Vector::zeros(1)), 0.0);
    }
}
