//! Solvers for monotone equations `V(z) = 0`.
//!
//! The centerpiece is Fast OGDA, an optimistic gradient method with
//! Nesterov momentum and an operator correction term, in an explicit
//! variant (one evaluation of `V` per iteration, last-iterate
//! `‖V(z^k)‖ = o(1/k)`) and an implicit, resolvent-based variant with a
//! time-scaling sequence `β_k`. Around it:
//!
//! - [`operator`] and [`problem`]: monotone operators and the bilinear
//!   saddle-point test instances;
//! - [`solvers`]: Fast OGDA and the EG, OGDA, EAG, Nesterov-EAG and
//!   Halpern-OGDA baselines, all logging through [`solvers::IterateLog`];
//! - [`continuous`]: the underlying second-order dynamics and its energy;
//! - [`diagnostics`]: discrete energies and fitted rate exponents;
//! - [`bench`]: suites, stopping rules and performance profiles.

pub mod bench;
pub mod continuous;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod reference;
pub mod solvers;

#[cfg(test)]
mod invariants;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use operator::{MonotoneOperator, Operator};
pub use problem::{build_ouyang_xu, build_random_sparse, saddle_operator, SaddleProblem};
pub use reference::{gap_surrogate, reference_solution, RefMethod, SolutionRef};
