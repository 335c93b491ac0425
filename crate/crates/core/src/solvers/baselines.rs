//! Extragradient, optimistic gradient and the anchored variants.

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operator::{Counting, MonotoneOperator};

use super::config::SolverConfig;
use super::log::{IterateLog, Recorder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EagMode {
    Constant,
    Variable,
}

/// One step of the step-size recursion
/// `s_{k+1} = s_k(1 − s_k²L²/((k+1)(k+3)(1 − s_k²L²)))`.
pub fn eag_next_step(k: usize, s: f64, l: f64) -> Result<f64> {
    let sl2 = (s * l).powi(2);
    if sl2 >= 1.0 {
        return Err(Error::Config(format!(
            "step recursion undefined at k = {k}: s_k L = {}",
            s * l
        )));
    }
    let kf = k as f64;
    Ok(s * (1.0 - sl2 / ((kf + 1.0) * (kf + 3.0) * (1.0 - sl2))))
}

fn check_bound(rec: &mut Recorder, name: &str, step: f64, limit: f64, l: Option<f64>) {
    if let Some(l) = l {
        if l > 0.0 && step * l >= limit {
            rec.warn(format!(
                "{name}: step {step} violates s*L < {limit} (L = {l})"
            ));
        }
    }
}

/// Extragradient: `z̄ = z − sV(z)`, `z⁺ = z − sV(z̄)`.
pub fn run_eg<O: MonotoneOperator + ?Sized>(op: &O, cfg: &SolverConfig) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    let mut rec = Recorder::new("eg", cfg);
    check_bound(&mut rec, "eg", cfg.step, 1.0, op.lipschitz());
    let alg = Counting::new(op);
    let s = cfg.step;
    let mut z = cfg.z0.clone();
    let mut z_prev: Option<Vector> = None;
    let mut vz = Vector::zeros(op.dim());
    let mut vbar = Vector::zeros(op.dim());
    for k in 0..=cfg.cap() {
        alg.apply_into(&z, &mut vz);
        let zbar = &z - s * &vz;
        alg.apply_into(&zbar, &mut vbar);
        if rec.record(k, &z, z_prev.as_ref(), &vz, Some(&vbar), Some(&zbar))? || k == cfg.cap() {
            break;
        }
        let next = &z - s * &vbar;
        z_prev = Some(std::mem::replace(&mut z, next));
    }
    Ok(rec.finish(z, alg.count(), 0))
}

/// Optimistic gradient: `z^{k+1} = z^k − 2sV(z^k) + sV(z^{k−1})`, one new
/// evaluation per step. Starts from `z⁰, z¹`.
pub fn run_ogda<O: MonotoneOperator + ?Sized>(op: &O, cfg: &SolverConfig) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    let mut rec = Recorder::new("ogda", cfg);
    check_bound(&mut rec, "ogda", cfg.step, 0.5, op.lipschitz());
    let alg = Counting::new(op);
    let s = cfg.step;
    let mut z_prev = cfg.z0.clone();
    let mut v_prev = alg.apply(&z_prev);
    if rec.record(0, &z_prev, None, &v_prev, None, None)? || cfg.cap() == 0 {
        return Ok(rec.finish(z_prev, alg.count(), 0));
    }
    let mut z = cfg.start1().clone();
    let mut vz = Vector::zeros(op.dim());
    for k in 1..=cfg.cap() {
        alg.apply_into(&z, &mut vz);
        if rec.record(k, &z, Some(&z_prev), &vz, None, None)? || k == cfg.cap() {
            break;
        }
        let next = &z - 2.0 * s * &vz + s * &v_prev;
        z_prev = std::mem::replace(&mut z, next);
        std::mem::swap(&mut v_prev, &mut vz);
    }
    Ok(rec.finish(z, alg.count(), 0))
}

/// Step sizes of the anchored schemes for iteration `k`: `(first, second)`.
trait AnchorSteps {
    fn steps(&mut self, k: usize) -> Result<(f64, f64)>;
}

struct ConstantSteps(f64);

impl AnchorSteps for ConstantSteps {
    fn steps(&mut self, _k: usize) -> Result<(f64, f64)> {
        Ok((self.0, self.0))
    }
}

/// Recursion state: `current` is `s_k` when `steps(k)` is called.
struct VariableSteps {
    current: f64,
    l: f64,
    next_k: usize,
}

impl AnchorSteps for VariableSteps {
    fn steps(&mut self, k: usize) -> Result<(f64, f64)> {
        debug_assert_eq!(k, self.next_k);
        let s = self.current;
        self.current = eag_next_step(k, s, self.l)?;
        self.next_k += 1;
        Ok((s, s))
    }
}

struct NesterovSteps(f64);

impl AnchorSteps for NesterovSteps {
    fn steps(&mut self, k: usize) -> Result<(f64, f64)> {
        let kf = k as f64;
        Ok(((kf + 1.0) / (self.0 * (kf + 2.0)), 1.0 / self.0))
    }
}

/// Anchored two-call scheme shared by EAG and its Nesterov variant.
fn run_anchored<O: MonotoneOperator + ?Sized>(
    op: &O,
    cfg: &SolverConfig,
    rec: &mut Recorder,
    steps: &mut dyn AnchorSteps,
) -> Result<(Vector, usize)> {
    let alg = Counting::new(op);
    let z0 = &cfg.z0;
    let mut z = z0.clone();
    let mut z_prev: Option<Vector> = None;
    let mut vz = Vector::zeros(op.dim());
    let mut vbar = Vector::zeros(op.dim());
    for k in 0..=cfg.cap() {
        let (s1, s2) = steps.steps(k)?;
        let anchored = &z + (z0 - &z) / (k as f64 + 2.0);
        alg.apply_into(&z, &mut vz);
        let zbar = &anchored - s1 * &vz;
        alg.apply_into(&zbar, &mut vbar);
        if rec.record(k, &z, z_prev.as_ref(), &vz, Some(&vbar), Some(&zbar))? || k == cfg.cap() {
            break;
        }
        let next = anchored - s2 * &vbar;
        z_prev = Some(std::mem::replace(&mut z, next));
    }
    Ok((z, alg.count()))
}

/// Extra anchored gradient, constant step `s` or the variable recursion
/// started at `s0`.
pub fn run_eag<O: MonotoneOperator + ?Sized>(
    op: &O,
    cfg: &SolverConfig,
    mode: EagMode,
    s0: f64,
) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::Config(format!("s0 must be positive, got {s0}")));
    }
    let (name, mut steps): (&str, Box<dyn AnchorSteps>) = match mode {
        EagMode::Constant => ("eag-c", Box::new(ConstantSteps(s0))),
        EagMode::Variable => {
            let l = op.lipschitz().ok_or_else(|| {
                Error::Config("variable-step EAG needs a Lipschitz bound".into())
            })?;
            ("eag-v", Box::new(VariableSteps {
                current: s0,
                l,
                next_k: 0,
            }))
        }
    };
    let mut rec = Recorder::new(name, cfg);
    match mode {
        EagMode::Constant => check_bound(&mut rec, name, s0, 0.125 + 1e-15, op.lipschitz()),
        EagMode::Variable => check_bound(&mut rec, name, s0, 0.75, op.lipschitz()),
    }
    let (z, evals) = run_anchored(op, cfg, &mut rec, steps.as_mut())?;
    Ok(rec.finish(z, evals, 0))
}

/// Anchored scheme with first-line step `(k+1)/(L(k+2))` and second-line
/// step `1/L`.
pub fn run_nesterov_eag<O: MonotoneOperator + ?Sized>(
    op: &O,
    cfg: &SolverConfig,
) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    let l = match op.lipschitz() {
        Some(l) if l > 0.0 => l,
        _ => {
            return Err(Error::Config(
                "nesterov-eag needs a positive Lipschitz bound".into(),
            ))
        }
    };
    let mut rec = Recorder::new("nesterov-eag", cfg);
    let (z, evals) = run_anchored(op, cfg, &mut rec, &mut NesterovSteps(l))?;
    Ok(rec.finish(z, evals, 0))
}

/// Variable-step EAG with `V(z^k)` in the first line replaced by
/// `V(z̄^{k−1})`. The first step uses `V(zbar0)`.
pub fn run_halpern_ogda<O: MonotoneOperator + ?Sized>(
    op: &O,
    cfg: &SolverConfig,
    s0: f64,
) -> Result<IterateLog> {
    cfg.validate(op.dim())?;
    if !(s0 > 0.0 && s0.is_finite()) {
        return Err(Error::Config(format!("s0 must be positive, got {s0}")));
    }
    let l = op
        .lipschitz()
        .ok_or_else(|| Error::Config("halpern-ogda needs a Lipschitz bound".into()))?;
    let mut rec = Recorder::new("halpern-ogda", cfg);
    check_bound(&mut rec, "halpern-ogda", s0, 0.75, Some(l));
    let mut steps = VariableSteps {
        current: s0,
        l,
        next_k: 0,
    };
    let alg = Counting::new(op);
    let mut monitor = 0;
    let z0 = &cfg.z0;
    let mut z = z0.clone();
    let mut z_prev: Option<Vector> = None;
    let mut vbar_prev = alg.apply(cfg.start_bar());
    let mut vbar = Vector::zeros(op.dim());
    let mut vz = Vector::zeros(op.dim());
    for k in 0..=cfg.cap() {
        let (s, _) = steps.steps(k)?;
        let anchored = &z + (z0 - &z) / (k as f64 + 2.0);
        let zbar = &anchored - s * &vbar_prev;
        alg.apply_into(&zbar, &mut vbar);
        op.apply_into(&z, &mut vz);
        monitor += 1;
        if rec.record(k, &z, z_prev.as_ref(), &vz, Some(&vbar), Some(&zbar))? || k == cfg.cap() {
            break;
        }
        let next = anchored - s * &vbar;
        z_prev = Some(std::mem::replace(&mut z, next));
        std::mem::swap(&mut vbar_prev, &mut vbar);
    }
    Ok(rec.finish(z, alg.count(), monitor))
}
