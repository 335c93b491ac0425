//! `fastogda` command line: problem generation, single runs, continuous
//! trajectories, performance profiles and log diagnostics.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fastogda::bench::{perf_profile, run_suite, write_profile_outputs, SuiteConfig};
use fastogda::continuous::{integrate, BetaFunction, IntegrateConfig};
use fastogda::diagnostics::{
    explicit_energy_series, implicit_energy_series, implicit_lambda_window, k1_threshold,
    rate_slope, DiagnosticReport, EnergyConfig, Metric,
};
use fastogda::solvers::{run_solver, BetaSchedule, IterateLog, SolverConfig, SolverKind, StopCriteria};
use fastogda::{
    build_ouyang_xu, build_random_sparse, reference_solution, saddle_operator, Error,
    MonotoneOperator, Operator, SaddleProblem, Vector,
};
use nalgebra::DVector;

#[derive(Parser)]
#[command(name = "fastogda", version, about = "Fast OGDA solvers and benchmarks for monotone equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a saddle-point problem file.
    Generate {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one solver on one problem and write its log as CSV.
    Solve {
        #[arg(long)]
        solver: SolverKind,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        /// Step size; defaults to the solver's standard multiple of 1/L.
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        kmax: usize,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        start: StartArgs,
        #[command(flatten)]
        beta: BetaArgs,
        /// Stop early once both relative tolerances hold.
        #[arg(long)]
        stop: bool,
        #[arg(long, default_value_t = 1e-6)]
        tol_op: f64,
        #[arg(long, default_value_t = 1e-5)]
        tol_vec: f64,
        #[arg(long, default_value_t = 1)]
        record_every: usize,
        /// Output CSV; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the continuous-time system and write the trajectory CSV.
    Integrate {
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        #[arg(long, default_value_t = 1.0)]
        t0: f64,
        #[arg(long, default_value_t = 100.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 10)]
        sample_every: usize,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        start: StartArgs,
        #[command(flatten)]
        beta: BetaArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a benchmark suite and write cost matrices and profile curves.
    Profile {
        /// `key = value` suite file; defaults apply to missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "profile")]
        out: PathBuf,
    },
    /// Fit rate exponents on a log, or rerun a Fast OGDA variant and
    /// evaluate its energies.
    Diagnose {
        /// Log CSV written by `solve`.
        #[arg(long, conflicts_with = "energies")]
        log: Option<PathBuf>,
        #[arg(long, default_value = "residual")]
        metric: Metric,
        /// Fraction of the log used by the fit, counted from the end.
        #[arg(long, default_value_t = 0.5)]
        window: f64,
        /// Rerun with iterate snapshots and evaluate the discrete energies.
        #[arg(long)]
        energies: bool,
        #[arg(long, default_value = "fast-ogda-explicit")]
        solver: SolverKind,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long, default_value_t = 2_000)]
        kmax: usize,
        /// Energy parameter; defaults to 1 (explicit) or the window midpoint
        /// (implicit).
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1.6)]
        gamma: f64,
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        start: StartArgs,
        #[command(flatten)]
        beta: BetaArgs,
        /// Report CSV for the energy mode.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    OuyangXu,
    Random,
}

#[derive(Args)]
struct ProblemArgs {
    /// Generator name or path to a problem file.
    #[arg(long, default_value = "ouyang-xu")]
    problem: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Rows of the coupling matrix for random problems; defaults to n.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    density: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Fixed Lipschitz constant instead of the power-iteration estimate.
    #[arg(long)]
    lipschitz: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartKind {
    Zero,
    Ones,
    Normal,
}

#[derive(Args)]
struct StartArgs {
    #[arg(long, value_enum, default_value = "zero")]
    start: StartKind,
    #[arg(long, default_value_t = 1)]
    start_seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BetaKindArg {
    Constant,
    Polynomial,
}

#[derive(Args)]
struct BetaArgs {
    #[arg(long, value_enum, default_value = "constant")]
    beta: BetaKindArg,
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    /// Exponent of the polynomial schedule.
    #[arg(long, default_value_t = 0.0)]
    rho: f64,
}

impl BetaArgs {
    fn schedule(&self) -> fastogda::Result<BetaSchedule> {
        match self.beta {
            BetaKindArg::Constant => BetaSchedule::constant(self.beta0),
            BetaKindArg::Polynomial => BetaSchedule::polynomial(self.beta0, self.rho),
        }
    }

    fn function(&self) -> fastogda::Result<BetaFunction> {
        match self.beta {
            BetaKindArg::Constant => BetaFunction::constant(self.beta0),
            BetaKindArg::Polynomial => BetaFunction::polynomial(self.beta0, self.rho),
        }
    }

    fn describe(&self) -> String {
        match self.beta {
            BetaKindArg::Constant => format!("constant {}", self.beta0),
            BetaKindArg::Polynomial => format!("polynomial {} k^{}", self.beta0, self.rho),
        }
    }
}

impl ProblemArgs {
    fn load(&self) -> fastogda::Result<SaddleProblem> {
        match Generator::from_str(&self.problem, false) {
            Ok(Generator::OuyangXu) => build_ouyang_xu(self.n),
            Ok(Generator::Random) => {
                build_random_sparse(self.n, self.m.unwrap_or(self.n), self.density, self.seed)
            }
            Err(_) if Path::new(&self.problem).exists() => SaddleProblem::read(&self.problem),
            Err(_) => Err(Error::Config(format!(
                "unknown problem '{}': expected ouyang-xu, random or an existing file",
                self.problem
            ))),
        }
    }

    fn operator(&self) -> fastogda::Result<(SaddleProblem, Operator)> {
        let p = self.load()?;
        let op = saddle_operator(&p, self.lipschitz)?;
        Ok((p, op))
    }

    fn describe(&self, p: &SaddleProblem, op: &Operator) -> String {
        let mut s = format!("# problem = {}\n# n = {}\n# m = {}\n", self.problem, p.n(), p.m());
        if self.problem == "random" {
            let _ = writeln!(s, "# density = {}\n# seed = {}", self.density, self.seed);
        }
        let _ = writeln!(s, "# lipschitz = {}", op.lipschitz().map_or("none".into(), |l| format!("{l:e}")));
        s
    }
}

impl StartArgs {
    fn point(&self, dim: usize) -> Vector {
        match self.start {
            StartKind::Zero => DVector::zeros(dim),
            StartKind::Ones => DVector::from_element(dim, 1.0),
            StartKind::Normal => {
                use rand::SeedableRng;
                use rand_distr::{Distribution, StandardNormal};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.start_seed);
                DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng))
            }
        }
    }

    fn describe(&self) -> String {
        match self.start {
            StartKind::Zero => "# start = zero\n".into(),
            StartKind::Ones => "# start = ones\n".into(),
            StartKind::Normal => format!("# start = normal\n# start_seed = {}\n", self.start_seed),
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> fastogda::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn default_step(kind: SolverKind, op: &Operator) -> fastogda::Result<f64> {
    if kind == SolverKind::FastOgdaImplicit {
        return Ok(kind.default_step(1.0));
    }
    match op.lipschitz() {
        Some(l) if l > 0.0 => Ok(kind.default_step(l)),
        _ => Err(Error::Config(format!("{kind} needs --s when no positive Lipschitz constant is known"))),
    }
}

fn solve_header(kind: SolverKind, alpha: f64, s: f64, kmax: usize, beta: &BetaArgs) -> String {
    let mut h = format!("# solver = {kind}\n# alpha = {alpha}\n# s = {s:e}\n# kmax = {kmax}\n");
    if kind == SolverKind::FastOgdaImplicit {
        let _ = writeln!(h, "# beta = {}", beta.describe());
    }
    h
}

fn cmd_generate(problem: &ProblemArgs, out: &Path) -> fastogda::Result<()> {
    let p = problem.load()?;
    p.write(out)?;
    println!("wrote {} (n = {}, m = {})", out.display(), p.n(), p.m());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_solve(
    kind: SolverKind,
    alpha: f64,
    s: Option<f64>,
    kmax: usize,
    problem: &ProblemArgs,
    start: &StartArgs,
    beta: &BetaArgs,
    stop: Option<StopCriteria>,
    record_every: usize,
    out: Option<&Path>,
) -> fastogda::Result<()> {
    let (p, op) = problem.operator()?;
    let s = match s {
        Some(s) => s,
        None => default_step(kind, &op)?,
    };
    let mut cfg = SolverConfig::new(start.point(op.dim()), s)
        .alpha(alpha)
        .k_max(kmax)
        .record_every(record_every);
    if let Some(stop) = stop {
        cfg = cfg.stop(stop);
    }
    let log = run_solver(kind, &op, &cfg, &beta.schedule()?)?;
    let mut text = solve_header(kind, alpha, s, kmax, beta);
    text.push_str(&problem.describe(&p, &op));
    text.push_str(&start.describe());
    if let Some(st) = stop {
        let _ = writeln!(text, "# tol_op = {:e}\n# tol_vec = {:e}", st.tol_op, st.tol_vec);
    }
    let _ = writeln!(text, "# evaluations = {}", log.evaluations);
    for w in &log.warnings {
        let _ = writeln!(text, "# warning = {w}");
        eprintln!("warning: {w}");
    }
    text.push_str(&log.to_csv());
    emit(out, &text)?;
    if out.is_some() {
        println!(
            "{kind}: {} iterations, final residual {:.6e}{}",
            log.last_k(),
            log.final_residual(),
            log.stopped_at.map_or(String::new(), |k| format!(", stopped at k = {k}"))
        );
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_integrate(
    alpha: f64,
    t0: f64,
    t_end: f64,
    dt: f64,
    sample_every: usize,
    problem: &ProblemArgs,
    start: &StartArgs,
    beta: &BetaArgs,
    out: Option<&Path>,
) -> fastogda::Result<()> {
    let (p, op) = problem.operator()?;
    let mut cfg = IntegrateConfig::new(t_end, alpha);
    cfg.t0 = t0;
    cfg.dt = dt;
    cfg.sample_every = sample_every;
    cfg.beta = beta.function()?;
    if let Some(map) = op.affine() {
        if let Ok(r) = reference_solution(&op, 1e-10 * (1.0 + map.offset().norm())) {
            cfg.z_star = Some(r.z_star);
            cfg.z_star_residual = r.residual;
        }
    }
    let z0 = start.point(op.dim());
    let traj = integrate(&op, &z0, &DVector::zeros(op.dim()), &cfg)?;
    let mut text = problem.describe(&p, &op);
    text.push_str(&start.describe());
    let _ = writeln!(text, "# t_end = {t_end}\n# sample_every = {sample_every}");
    text.push_str(&traj.to_csv());
    emit(out, &text)
}

fn cmd_profile(config: Option<&Path>, seed: Option<u64>, out: &Path) -> fastogda::Result<()> {
    let mut cfg = match config {
        Some(path) => SuiteConfig::parse(&std::fs::read_to_string(path)?)?,
        None => SuiteConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let spec = cfg.build()?;
    let result = run_suite(&spec)?;
    let iters = perf_profile(&result.solver_ids, &result.iteration_matrix(), cfg.tau_max, cfg.tau_points)?;
    let evals = perf_profile(&result.solver_ids, &result.evaluation_matrix(), cfg.tau_max, cfg.tau_points)?;
    let preamble: String = cfg.to_text().lines().map(|l| format!("# {l}\n")).collect();
    write_profile_outputs(out, &result, &iters, &evals, &preamble)?;
    for (s, id) in iters.solver_ids.iter().enumerate() {
        let solved = result.outcomes.iter().filter(|row| row[s].iterations.is_some()).count();
        println!("{id:20} solved {solved:4}/{}  rho(1) = {:.3}", result.problem_ids.len(), iters.rho(s, 1.0));
    }
    println!("wrote profiles to {}", out.display());
    Ok(())
}

fn cmd_diagnose_log(path: &Path, metric: Metric, window: f64) -> fastogda::Result<()> {
    let log = IterateLog::from_csv(&std::fs::read_to_string(path)?)?;
    let fit = rate_slope(&log, metric, window)?;
    println!(
        "{}: slope {:.6} over k in [{}, {}] (r^2 = {:.4}, {} points)",
        log.method, fit.slope, fit.window.0, fit.window.1, fit.r_squared, fit.points
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_diagnose_energies(
    kind: SolverKind,
    alpha: f64,
    s: Option<f64>,
    kmax: usize,
    lambda: Option<f64>,
    gamma: f64,
    window: f64,
    problem: &ProblemArgs,
    start: &StartArgs,
    beta: &BetaArgs,
    out: Option<&Path>,
) -> fastogda::Result<()> {
    let (_, op) = problem.operator()?;
    let s = match s {
        Some(s) => s,
        None => default_step(kind, &op)?,
    };
    let schedule = beta.schedule()?;
    let z_star = reference_solution(&op, 1e-10)?.z_star;
    let cfg = SolverConfig::new(start.point(op.dim()), s)
        .alpha(alpha)
        .k_max(kmax)
        .snapshots(true);
    let log = run_solver(kind, &op, &cfg, &schedule)?;
    let mut report = DiagnosticReport::from_log(&log, window);
    match kind {
        SolverKind::FastOgdaImplicit => {
            let (lo, hi, mid) = implicit_lambda_window(alpha, &schedule)?;
            let lambda = lambda.unwrap_or(mid);
            let ecfg = EnergyConfig { lambda, gamma, s, alpha, l: None };
            let e = implicit_energy_series(&op, &log, &z_star, &ecfg, &schedule)?;
            report.set_energies(&e, &[]);
            report.lambda = Some(lambda);
            report.lambda_window = Some((lo, hi));
        }
        SolverKind::FastOgdaExplicit => {
            let lambda = lambda.unwrap_or(1.0);
            let ecfg = EnergyConfig { lambda, gamma, s, alpha, l: op.lipschitz() };
            let rows = explicit_energy_series(&op, &log, &z_star, &ecfg)?;
            let k1 = k1_threshold(lambda, alpha, gamma);
            let e: Vec<(usize, f64)> = rows.iter().map(|r| (r.k, r.e)).collect();
            let f: Vec<(usize, f64)> = rows.iter().filter(|r| r.k >= k1).map(|r| (r.k, r.f)).collect();
            report.set_energies(&e, &f);
            report.lambda = Some(lambda);
            report.gamma = Some(gamma);
        }
        other => {
            return Err(Error::Config(format!(
                "energies are defined for the Fast OGDA variants only, not {other}"
            )))
        }
    }
    print!("{}", report.summary());
    if let Some(path) = out {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(())
}

fn run(cli: Cli) -> fastogda::Result<()> {
    match cli.command {
        Command::Generate { problem, out } => cmd_generate(&problem, &out),
        Command::Solve {
            solver,
            alpha,
            s,
            kmax,
            problem,
            start,
            beta,
            stop,
            tol_op,
            tol_vec,
            record_every,
            out,
        } => {
            let stop = if stop { Some(StopCriteria::new(tol_op, tol_vec, kmax)?) } else { None };
            cmd_solve(solver, alpha, s, kmax, &problem, &start, &beta, stop, record_every, out.as_deref())
        }
        Command::Integrate { alpha, t0, t_end, dt, sample_every, problem, start, beta, out } => {
            cmd_integrate(alpha, t0, t_end, dt, sample_every, &problem, &start, &beta, out.as_deref())
        }
        Command::Profile { config, seed, out } => cmd_profile(config.as_deref(), seed, &out),
        Command::Diagnose {
            log,
            metric,
            window,
            energies,
            solver,
            alpha,
            s,
            kmax,
            lambda,
            gamma,
            problem,
            start,
            beta,
            out,
        } => match (log, energies) {
            (Some(path), _) => cmd_diagnose_log(&path, metric, window),
            (None, true) => cmd_diagnose_energies(
                solver, alpha, s, kmax, lambda, gamma, window, &problem, &start, &beta, out.as_deref(),
            ),
            (None, false) => Err(Error::Config("diagnose needs --log or --energies".into())),
        },
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::Config(_) | Error::InvalidArgument(_) | Error::Parse(_) | Error::DimensionMismatch(_) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
