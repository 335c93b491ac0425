//! Benchmark protocol: solver suites over generated saddle problems and
//! Dolan–Moré performance profiles.

mod config;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::SuiteConfig;
pub use crate::solvers::check_stop;

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::operator::{random_point, MonotoneOperator, Operator};
use crate::problem::{build_ouyang_xu, build_random_sparse, saddle_operator, SaddleProblem};
use crate::solvers::{run_solver, BetaSchedule, IterateLog, SolverConfig, SolverKind, StopCriteria};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    Random,
    OuyangXu,
}

/// Lipschitz constant handed to the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LipschitzChoice {
    /// Power-iteration estimate of `‖M‖` per problem.
    Estimate,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: String,
    pub generator: Generator,
    pub n: usize,
    pub m: usize,
    pub density: f64,
    pub matrix_seed: u64,
    /// Seed of the standard normal starting point.
    pub start_seed: u64,
}

impl ProblemSpec {
    pub fn instance(&self) -> Result<SaddleProblem> {
        match self.generator {
            Generator::Random => build_random_sparse(self.n, self.m, self.density, self.matrix_seed),
            Generator::OuyangXu => build_ouyang_xu(self.n),
        }
    }

    pub fn start(&self) -> Vector {
        let mut rng = ChaCha8Rng::seed_from_u64(self.start_seed);
        random_point(self.n + self.m, 1.0, &mut rng)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub id: String,
    pub kind: SolverKind,
    pub alpha: f64,
    /// Step is `step_scale / L`; `None` uses the experimental default.
    pub step_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub problems: Vec<ProblemSpec>,
    pub solvers: Vec<SolverSpec>,
    pub stop: StopCriteria,
    pub lipschitz: LipschitzChoice,
    /// Keep per-run logs in the result.
    pub keep_logs: bool,
}

impl SuiteSpec {
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for p in &self.problems {
            if !ids.insert(&p.id) {
                return Err(Error::Config(format!("duplicate problem id '{}'", p.id)));
            }
        }
        let mut ids = HashSet::new();
        for s in &self.solvers {
            if !ids.insert(&s.id) {
                return Err(Error::Config(format!("duplicate solver id '{}'", s.id)));
            }
        }
        if let LipschitzChoice::Fixed(l) = self.lipschitz {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::Config(format!("Lipschitz constant must be positive, got {l}")));
            }
        }
        if self.problems.is_empty() || self.solvers.is_empty() {
            return Err(Error::Config("suite needs problems and solvers".into()));
        }
        Ok(())
    }
}

/// Outcome of one (problem, solver) run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// First index satisfying the stop rule.
    pub iterations: Option<usize>,
    /// Algorithm operator evaluations up to that index.
    pub evaluations: Option<usize>,
    pub final_residual: f64,
    /// Error text for runs that aborted (divergence, bad config).
    pub failure: Option<String>,
    pub log: Option<IterateLog>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub problem_ids: Vec<String>,
    pub solver_ids: Vec<String>,
    /// `outcomes[p][s]`
    pub outcomes: Vec<Vec<RunOutcome>>,
}

impl SuiteResult {
    pub fn iteration_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.outcomes
            .iter()
            .map(|row| row.iter().map(|o| o.iterations.map(|t| t as f64)).collect())
            .collect()
    }

    pub fn evaluation_matrix(&self) -> Vec<Vec<Option<f64>>> {
        self.outcomes
            .iter()
            .map(|row| row.iter().map(|o| o.evaluations.map(|t| t as f64)).collect())
            .collect()
    }
}

fn run_one(op: &Operator, z0: &Vector, spec: &SolverSpec, suite: &SuiteSpec) -> RunOutcome {
    let l = op.lipschitz().unwrap_or(1.0);
    let step = spec
        .step_scale
        .map_or_else(|| spec.kind.default_step(l), |c| c / l);
    let cfg = SolverConfig::new(z0.clone(), step)
        .alpha(spec.alpha)
        .k_max(suite.stop.k_max)
        .stop(suite.stop);
    let beta = BetaSchedule::constant(1.0).expect("positive");
    match run_solver(spec.kind, op, &cfg, &beta) {
        Ok(log) => RunOutcome {
            iterations: log.stopped_at,
            evaluations: log.stopped_at.map(|_| log.evaluations),
            final_residual: log.final_residual(),
            failure: None,
            log: suite.keep_logs.then_some(log),
        },
        Err(e) => RunOutcome {
            iterations: None,
            evaluations: None,
            final_residual: f64::NAN,
            failure: Some(e.to_string()),
            log: None,
        },
    }
}

/// Runs every solver on every problem in parallel. Results are merged by
/// index, so the output does not depend on scheduling. Failed runs count as
/// unsolved.
pub fn run_suite(suite: &SuiteSpec) -> Result<SuiteResult> {
    suite.validate()?;
    let instances: Vec<(Operator, Vector)> = suite
        .problems
        .par_iter()
        .map(|p| {
            let inst = p.instance()?;
            let l = match suite.lipschitz {
                LipschitzChoice::Estimate => None,
                LipschitzChoice::Fixed(l) => Some(l),
            };
            Ok((saddle_operator(&inst, l)?, p.start()))
        })
        .collect::<Result<_>>()?;
    let ns = suite.solvers.len();
    let flat: Vec<RunOutcome> = (0..suite.problems.len() * ns)
        .into_par_iter()
        .map(|idx| {
            let (op, z0) = &instances[idx / ns];
            run_one(op, z0, &suite.solvers[idx % ns], suite)
        })
        .collect();
    let outcomes = flat.chunks(ns).map(|c| c.to_vec()).collect();
    Ok(SuiteResult {
        problem_ids: suite.problems.iter().map(|p| p.id.clone()).collect(),
        solver_ids: suite.solvers.iter().map(|s| s.id.clone()).collect(),
        outcomes,
    })
}

/// Performance ratios and profile curves.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileResult {
    pub solver_ids: Vec<String>,
    /// Costs `t_{p,s}`, `None` when unsolved.
    pub t_matrix: Vec<Vec<Option<f64>>>,
    /// `r_{p,s} = t_{p,s}/min_s t_{p,s}`, `0` when unsolved.
    pub r_matrix: Vec<Vec<f64>>,
    pub taus: Vec<f64>,
    /// `curves[s][i] = ρ_s(taus[i])`
    pub curves: Vec<Vec<f64>>,
}

impl ProfileResult {
    /// `ρ_s(τ) = #{p : 0 < r_{p,s} ≤ τ} / N_p`
    pub fn rho(&self, solver: usize, tau: f64) -> f64 {
        let np = self.r_matrix.len();
        if np == 0 {
            return 0.0;
        }
        let hits = self
            .r_matrix
            .iter()
            .filter(|row| row[solver] > 0.0 && row[solver] <= tau)
            .count();
        hits as f64 / np as f64
    }
}

/// Performance ratios for one cost matrix. Problems nobody solved give
/// `r = 0` everywhere but still count in `N_p`.
pub fn performance_ratios(t: &[Vec<Option<f64>>]) -> Vec<Vec<f64>> {
    t.iter()
        .map(|row| {
            let best = row.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            row.iter()
                .map(|c| match c {
                    // A zero-cost solve only ties with other zero-cost solves.
                    Some(c) if best == 0.0 => {
                        if *c == 0.0 {
                            1.0
                        } else {
                            f64::INFINITY
                        }
                    }
                    Some(c) => c / best,
                    None => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Profile over the grid of `points` values evenly spaced in `[1, tau_max]`.
pub fn perf_profile(
    solver_ids: &[String],
    t: &[Vec<Option<f64>>],
    tau_max: f64,
    points: usize,
) -> Result<ProfileResult> {
    if t.is_empty() {
        return Err(Error::InsufficientData("profile of an empty result set".into()));
    }
    if t.iter().any(|row| row.len() != solver_ids.len()) {
        return Err(Error::DimensionMismatch("cost rows must have one entry per solver".into()));
    }
    if !(tau_max >= 1.0) || points < 2 {
        return Err(Error::InvalidArgument("need tau_max >= 1 and at least two grid points".into()));
    }
    let r_matrix = performance_ratios(t);
    let taus: Vec<f64> = (0..points)
        .map(|i| 1.0 + (tau_max - 1.0) * i as f64 / (points - 1) as f64)
        .collect();
    let mut res = ProfileResult {
        solver_ids: solver_ids.to_vec(),
        t_matrix: t.to_vec(),
        r_matrix,
        taus,
        curves: Vec::new(),
    };
    res.curves = (0..solver_ids.len())
        .map(|s| res.taus.iter().map(|&tau| res.rho(s, tau)).collect())
        .collect();
    Ok(res)
}

fn matrix_csv(problem_ids: &[String], solver_ids: &[String], rows: &[Vec<String>], preamble: &str) -> String {
    let mut s = String::from(preamble);
    let _ = writeln!(s, "problem,{}", solver_ids.join(","));
    for (id, row) in problem_ids.iter().zip(rows) {
        let _ = writeln!(s, "{id},{}", row.join(","));
    }
    s
}

/// Writes `tmatrix.csv`, `rmatrix.csv`, `profile_<solver>.csv` and the
/// per-evaluation counterparts into `dir`. Every file starts with
/// `preamble` (comment lines).
pub fn write_profile_outputs(
    dir: &Path,
    suite: &SuiteResult,
    iters: &ProfileResult,
    evals: &ProfileResult,
    preamble: &str,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (prefix, prof) in [("", iters), ("evals_", evals)] {
        let t_rows: Vec<Vec<String>> = prof
            .t_matrix
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| c.map_or("inf".to_string(), |c| format!("{c}")))
                    .collect()
            })
            .collect();
        let r_rows: Vec<Vec<String>> = prof
            .r_matrix
            .iter()
            .map(|row| row.iter().map(|r| crate::problem::fmt17(*r)).collect())
            .collect();
        let tname = if prefix.is_empty() { "tmatrix.csv".to_string() } else { "tmatrix_evals.csv".to_string() };
        let rname = if prefix.is_empty() { "rmatrix.csv".to_string() } else { "rmatrix_evals.csv".to_string() };
        std::fs::write(dir.join(tname), matrix_csv(&suite.problem_ids, &prof.solver_ids, &t_rows, preamble))?;
        std::fs::write(dir.join(rname), matrix_csv(&suite.problem_ids, &prof.solver_ids, &r_rows, preamble))?;
        for (s, id) in prof.solver_ids.iter().enumerate() {
            let mut text = String::from(preamble);
            text.push_str("tau,rho\n");
            for (tau, rho) in prof.taus.iter().zip(&prof.curves[s]) {
                let _ = writeln!(text, "{},{}", crate::problem::fmt17(*tau), crate::problem::fmt17(*rho));
            }
            std::fs::write(dir.join(format!("profile_{prefix}{id}.csv")), text)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    #[test]
    fn single_problem_hand_profile() {
        let t = vec![vec![Some(10.0), Some(20.0), None]];
        let p = perf_profile(&ids(3), &t, 10.0, 200).unwrap();
        assert_eq!(p.r_matrix[0], vec![1.0, 2.0, 0.0]);
        assert_eq!(p.rho(0, 1.0), 1.0);
        assert_eq!(p.rho(1, 1.0), 0.0);
        assert_eq!(p.rho(1, 2.0), 1.0);
        assert!(p.curves[2].iter().all(|&r| r == 0.0));
        assert_eq!(p.taus.len(), 200);
        assert_eq!((p.taus[0], p.taus[199]), (1.0, 10.0));
    }

    #[test]
    fn ties_and_unsolved_rows() {
        let t = vec![vec![Some(5.0), Some(5.0)], vec![None, None]];
        let p = perf_profile(&ids(2), &t, 4.0, 10).unwrap();
        assert_eq!(p.r_matrix, vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(p.rho(0, 1.0), 0.5);
        assert_eq!(p.rho(1, 3.0), 0.5);
    }

    #[test]
    fn zero_cost_solves() {
        let r = performance_ratios(&[vec![Some(0.0), Some(0.0), Some(3.0)]]);
        assert_eq!(r[0][0], 1.0);
        assert_eq!(r[0][1], 1.0);
        assert!(r[0][2].is_infinite());
    }

    #[test]
    fn profile_rejects_bad_input() {
        assert!(perf_profile(&ids(1), &[], 10.0, 20).is_err());
        assert!(perf_profile(&ids(2), &[vec![Some(1.0)]], 10.0, 20).is_err());
        assert!(perf_profile(&ids(1), &[vec![Some(1.0)]], 0.5, 20).is_err());
    }

    #[test]
    fn zero_operator_suite_solves_at_start() {
        let mut spec = SuiteConfig {
            pairs: vec![(3, 3)],
            matrices: 1,
            starts: 1,
            ..SuiteConfig::default()
        }
        .build()
        .unwrap();
        spec.keep_logs = true;
        // Replace the problem by one whose operator vanishes at the start.
        let op = Operator::zero(6).with_lipschitz(1.0).unwrap();
        let z0 = spec.problems[0].start();
        for s in &spec.solvers {
            let out = run_one(&op, &z0, s, &spec);
            assert_eq!(out.iterations, Some(0), "{}", s.id);
        }
    }
}
