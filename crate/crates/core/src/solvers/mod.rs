//! Discrete-time methods for `V(z) = 0` with uniform logging.

mod baselines;
mod config;
mod fast_ogda;
mod implicit;
mod log;

use std::fmt;
use std::str::FromStr;

pub use baselines::{
    eag_next_step, run_eag, run_eg, run_halpern_ogda, run_nesterov_eag, run_ogda, EagMode,
};
pub use config::{
    check_stop, BetaKind, BetaSchedule, GrowthReport, SolverConfig, StopCriteria,
    GROWTH_CHECK_HORIZON,
};
pub use fast_ogda::{
    fast_ogda_explicit_combined_step, fast_ogda_explicit_step, run_fast_ogda_explicit,
    ExplicitStep,
};
pub use implicit::{
    implicit_coefficients, resolvent_solve, run_fast_ogda_implicit, Resolvent, ResolventPoint,
    INNER_CAP,
};
pub use log::{IterateLog, Record, Snapshot, CSV_HEADER};

use crate::error::{Error, Result};
use crate::operator::MonotoneOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Eg,
    Ogda,
    EagConstant,
    EagVariable,
    NesterovEag,
    HalpernOgda,
    FastOgdaExplicit,
    FastOgdaImplicit,
}

impl SolverKind {
    pub const ALL: [SolverKind; 8] = [
        SolverKind::Eg,
        SolverKind::Ogda,
        SolverKind::EagConstant,
        SolverKind::EagVariable,
        SolverKind::NesterovEag,
        SolverKind::HalpernOgda,
        SolverKind::FastOgdaExplicit,
        SolverKind::FastOgdaImplicit,
    ];

    /// The six explicit methods compared in the experiments.
    pub const EXPERIMENT: [SolverKind; 6] = [
        SolverKind::Ogda,
        SolverKind::Eg,
        SolverKind::EagVariable,
        SolverKind::NesterovEag,
        SolverKind::HalpernOgda,
        SolverKind::FastOgdaExplicit,
    ];

    pub fn id(self) -> &'static str {
        match self {
            SolverKind::Eg => "eg",
            SolverKind::Ogda => "ogda",
            SolverKind::EagConstant => "eag-c",
            SolverKind::EagVariable => "eag-v",
            SolverKind::NesterovEag => "nesterov-eag",
            SolverKind::HalpernOgda => "halpern-ogda",
            SolverKind::FastOgdaExplicit => "fast-ogda-explicit",
            SolverKind::FastOgdaImplicit => "fast-ogda-implicit",
        }
    }

    /// Experimental step for Lipschitz constant `l`: `0.96/L` for EG,
    /// `0.48/L` for OGDA and explicit Fast OGDA, `0.5/L` as the start of the
    /// variable recursion, `1/(8L)` for constant-step EAG. Nesterov-EAG
    /// derives its own steps; implicit Fast OGDA is given `s = 1`.
    pub fn default_step(self, l: f64) -> f64 {
        match self {
            SolverKind::Eg => 0.96 / l,
            SolverKind::Ogda | SolverKind::FastOgdaExplicit => 0.48 / l,
            SolverKind::EagVariable | SolverKind::HalpernOgda => 0.5 / l,
            SolverKind::EagConstant => 0.125 / l,
            SolverKind::NesterovEag => 1.0 / l,
            SolverKind::FastOgdaImplicit => 1.0,
        }
    }

    /// Operator evaluations per iteration made by the algorithm.
    pub fn evaluations_per_iteration(self) -> Option<usize> {
        match self {
            SolverKind::Ogda | SolverKind::HalpernOgda | SolverKind::FastOgdaExplicit => Some(1),
            SolverKind::Eg
            | SolverKind::EagConstant
            | SolverKind::EagVariable
            | SolverKind::NesterovEag => Some(2),
            SolverKind::FastOgdaImplicit => None,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.id() == s)
            .ok_or_else(|| {
                let ids: Vec<&str> = SolverKind::ALL.iter().map(|k| k.id()).collect();
                Error::InvalidArgument(format!(
                    "unknown solver '{s}', expected one of {}",
                    ids.join(", ")
                ))
            })
    }
}

/// Runs `kind` with `cfg.step` as its step (or `s0` for the variable
/// recursion). `beta` is used by the implicit method only.
pub fn run_solver<O: MonotoneOperator + ?Sized>(
    kind: SolverKind,
    op: &O,
    cfg: &SolverConfig,
    beta: &BetaSchedule,
) -> Result<IterateLog> {
    match kind {
        SolverKind::Eg => run_eg(op, cfg),
        SolverKind::Ogda => run_ogda(op, cfg),
        SolverKind::EagConstant => run_eag(op, cfg, EagMode::Constant, cfg.step),
        SolverKind::EagVariable => run_eag(op, cfg, EagMode::Variable, cfg.step),
        SolverKind::NesterovEag => run_nesterov_eag(op, cfg),
        SolverKind::HalpernOgda => run_halpern_ogda(op, cfg, cfg.step),
        SolverKind::FastOgdaExplicit => run_fast_ogda_explicit(op, cfg),
        SolverKind::FastOgdaImplicit => run_fast_ogda_implicit(op, cfg, beta),
    }
}
