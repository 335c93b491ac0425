//! Explicit Fast OGDA.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operator::{Counting, MonotoneOperator};

use super::config::SolverConfig;
use super::log::{IterateLog, Recorder};

/// Output of one explicit step at index `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitStep {
    pub zbar: Vector,
    pub vbar: Vector,
    pub next: Vector,
}

/// Two-line update:
///
/// ```text
/// z̄^k     = z^k + (1 − α/(k+α))(z^k − z^{k−1}) − αs/(2(k+α))·V(z̄^{k−1})
/// z^{k+1} = z̄^k − (s/2)(1 + k/(k+α))(V(z̄^k) − V(z̄^{k−1}))
/// ```
pub fn fast_ogda_explicit_step<O: MonotoneOperator + ?Sized>(
    op: &O,
    k: usize,
    alpha: f64,
    s: f64,
    z: &Vector,
    z_prev: &Vector,
    vbar_prev: &Vector,
) -> ExplicitStep {
    let kf = k as f64;
    let ka = kf + alpha;
    let zbar = z + (1.0 - alpha / ka) * (z - z_prev) - (alpha * s / (2.0 * ka)) * vbar_prev;
    let vbar = op.apply(&zbar);
    let next = &zbar - (0.5 * s * (1.0 + kf / ka)) * (&vbar - vbar_prev);
    ExplicitStep { zbar, vbar, next }
}

/// Single-line equivalent of [`fast_ogda_explicit_step`]:
///
/// ```text
/// z^{k+1} = z^k + (1 − α/(k+α))(z^k − z^{k−1}) − αs/(2(k+α))·V(z̄^k)
///           − sk/(k+α)·(V(z̄^k) − V(z̄^{k−1}))
/// ```
pub fn fast_ogda_explicit_combined_step(
    k: usize,
    alpha: f64,
    s: f64,
    z: &Vector,
    z_prev: &Vector,
    vbar_prev: &Vector,
    vbar: &Vector,
) -> Vector {
    let kf = k as f64;
    let ka = kf + alpha;
    z + (1.0 - alpha / ka) * (z - z_prev)
        - (alpha * s / (2.0 * ka)) * vbar
        - (s * kf / ka) * (vbar - vbar_prev)
}

/// Explicit Fast OGDA from `z⁰, z¹, z̄⁰`. One operator evaluation per
/// iteration; the log's `residual` column costs one extra monitoring
/// evaluation of `V(z^k)`.
pub fn run_fast_ogda_explicit<O: MonotoneOperator + ?Sized>(
    op: &O,
    cfg: &SolverConfig,
) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    cfg.require_alpha()?;
    if let Some(l) = op.lipschitz() {
        if cfg.step * l >= 0.5 {
            return Err(Error::Config(format!(
                "fast-ogda-explicit needs s*L < 1/2, got s = {}, L = {l}",
                cfg.step
            )));
        }
    }
    let mut rec = Recorder::new("fast-ogda-explicit", cfg);
    let alg = Counting::new(op);
    let mut monitor = 0;
    let (alpha, s) = (cfg.alpha, cfg.step);

    let mut z_prev = cfg.z0.clone();
    let zbar0 = cfg.start_bar().clone();
    let mut vbar_prev = alg.apply(&zbar0);
    let mut vz = op.apply(&z_prev);
    monitor += 1;
    if rec.record(0, &z_prev, None, &vz, Some(&vbar_prev), Some(&zbar0))? || cfg.cap() == 0 {
        return Ok(rec.finish(z_prev, alg.count(), monitor));
    }
    let mut z = cfg.start1().clone();
    for k in 1..=cfg.cap() {
        let step = fast_ogda_explicit_step(&alg, k, alpha, s, &z, &z_prev, &vbar_prev);
        op.apply_into(&z, &mut vz);
        monitor += 1;
        if rec.record(k, &z, Some(&z_prev), &vz, Some(&step.vbar), Some(&step.zbar))?
            || k == cfg.cap()
        {
            break;
        }
        z_prev = std::mem::replace(&mut z, step.next);
        vbar_prev = step.vbar;
    }
    Ok(rec.finish(z, alg.count(), monitor))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Operator;

    #[test]
    fn explicit_hand_trace() {
        let op = Operator::identity(1);
        let one = Vector::from_element(1, 1.0);
        let st = fast_ogda_explicit_step(&op, 1, 3.0, 0.4, &one, &one, &one);
        assert!((st.zbar[0] - 0.85).abs() < 1e-12);
        assert!((st.next[0] - 0.8875).abs() < 1e-12);
        let comb = fast_ogda_explicit_combined_step(1, 3.0, 0.4, &one, &one, &one, &st.vbar);
        assert!((comb[0] - 0.8875).abs() < 1e-12);

        let log = run_fast_ogda_explicit(&op, &SolverConfig::new(one, 0.4).k_max(2)).unwrap();
        assert!((log.final_iterate[0] - 0.8875).abs() < 1e-12);
    }

    #[test]
    fn rejects_large_step_and_small_alpha() {
        let op = Operator::identity(1);
        let z = Vector::from_element(1, 1.0);
        assert!(run_fast_ogda_explicit(&op, &SolverConfig::new(z.clone(), 0.5)).is_err());
        assert!(run_fast_ogda_explicit(&op, &SolverConfig::new(z, 0.4).alpha(2.0)).is_err());
    }

    #[test]
    fn zero_operator_is_stationary() {
        let op = Operator::zero(3);
        let z0 = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let log = run_fast_ogda_explicit(&op, &SolverConfig::new(z0.clone(), 0.1).k_max(50)).unwrap();
        assert_eq!(log.final_iterate, z0);
    }
}
