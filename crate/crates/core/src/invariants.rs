//! Property tests for the invariants shared across modules.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{Matrix, Vector};
use crate::operator::{monotonicity_violation, Counting, MonotoneOperator, Operator};
use crate::problem::{build_ouyang_xu, build_random_sparse, saddle_operator, SaddleProblem};
use crate::reference::{gap_surrogate, reference_solution};

fn uniform(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0))
}

fn ouyang_xu(n: usize) -> Operator {
    saddle_operator(&build_ouyang_xu(n).unwrap(), None).unwrap()
}

/// `(Hx − h − Aᵀy, Ax − b)` straight from the blocks.
fn saddle_by_hand(p: &SaddleProblem, z: &Vector) -> Vector {
    let (n, m) = (p.n(), p.m());
    let x = z.rows(0, n).into_owned();
    let y = z.rows(n, m).into_owned();
    let top = &p.quad * &x - &p.h - p.coupling.transpose() * &y;
    let bottom = &p.coupling * &x - &p.b;
    Vector::from_iterator(n + m, top.iter().chain(bottom.iter()).copied())
}

mod operators {
    use super::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn random_instances_are_monotone(seed in any::<u64>(), n in 1usize..12, dm in 0usize..12, density in 0.05f64..1.0) {
            let m = 1 + dm % n;
            let p = build_random_sparse(n, m, density, seed).unwrap();
            let op = saddle_operator(&p, None).unwrap();
            let v = monotonicity_violation(&op, 1000, 3.0, seed ^ 1);
            prop_assert!(v <= 1e-10, "violation {v}");
        }

        #[test]
        fn affine_and_block_evaluations_agree(seed in any::<u64>(), n in 1usize..10, dm in 0usize..10) {
            let m = 1 + dm % n;
            let p = build_random_sparse(n, m, 0.6, seed).unwrap();
            let op = saddle_operator(&p, None).unwrap();
            let map = op.affine().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..100 {
                let z = uniform(op.dim(), &mut rng);
                let hand = saddle_by_hand(&p, &z);
                let scale = 1.0 + hand.norm();
                prop_assert!((op.apply(&z) - &hand).norm() <= 1e-12 * scale);
                prop_assert!((map.eval_dense(&z) - &hand).norm() <= 1e-12 * scale);
            }
        }

        #[test]
        fn lipschitz_estimate_bounds_differences(seed in any::<u64>(), n in 1usize..10) {
            let p = build_random_sparse(n, n, 0.7, seed).unwrap();
            let op = saddle_operator(&p, None).unwrap();
            let l = op.lipschitz().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..200 {
                let (x, y) = (uniform(op.dim(), &mut rng), uniform(op.dim(), &mut rng));
                let d = (&x - &y).norm();
                prop_assert!((op.apply(&x) - op.apply(&y)).norm() <= (l + 1e-10) * d + 1e-14);
            }
        }

        #[test]
        fn gap_surrogate_dominates_sampled_gap(seed in any::<u64>(), n in 1usize..8) {
            let op = ouyang_xu(n);
            let reference = reference_solution(&op, 1e-12).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z0 = uniform(op.dim(), &mut rng);
            let delta0 = (&z0 - &reference.z_star).norm();
            let z = uniform(op.dim(), &mut rng);
            let vz = op.apply(&z);
            let bound = gap_surrogate(&z, &reference, delta0, &vz);
            for _ in 0..100 {
                let dir = uniform(op.dim(), &mut rng);
                let radius = delta0 * rng.random::<f64>();
                let u = &reference.z_star + radius * dir.normalize();
                let inner = (&z - &u).dot(&op.apply(&u));
                prop_assert!(inner <= bound + 1e-10 * (1.0 + bound.abs()));
            }
        }
    }

    #[test]
    fn structured_instances() {
        for n in [1, 3, 10, 200] {
            let p = build_ouyang_xu(n).unwrap();
            assert!(p.coupling.clone().singular_values().max() <= 0.5 + 1e-9);
            assert!(p.quad.clone().symmetric_eigenvalues().max() <= 0.5 + 1e-9);
            let h2 = 2.0 * p.coupling.transpose() * &p.coupling;
            assert_relative_eq!(p.quad, h2, epsilon = 1e-15);
            let op = saddle_operator(&p, None).unwrap();
            assert!(monotonicity_violation(&op, 1000, 2.0, n as u64) <= 1e-10);
        }
    }
}

mod solvers {
    use super::*;
    use crate::solvers::{
        eag_next_step, fast_ogda_explicit_combined_step, fast_ogda_explicit_step, run_fast_ogda_explicit,
        run_fast_ogda_implicit, run_solver, BetaSchedule, SolverConfig, SolverKind,
    };

    fn flat() -> BetaSchedule {
        BetaSchedule::constant(1.0).unwrap()
    }

    fn run(kind: SolverKind, op: &dyn MonotoneOperator, z0: &Vector, k_max: usize) -> crate::solvers::IterateLog {
        let l = op.lipschitz().unwrap();
        let cfg = SolverConfig::new(z0.clone(), kind.default_step(l)).k_max(k_max);
        run_solver(kind, op, &cfg, &flat()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn runs_are_deterministic(seed in any::<u64>(), n in 1usize..6) {
            let p = build_random_sparse(n, n, 0.8, seed).unwrap();
            let op = saddle_operator(&p, None).unwrap();
            prop_assume!(op.lipschitz().unwrap() > 0.0);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z0 = uniform(op.dim(), &mut rng);
            for kind in SolverKind::ALL {
                prop_assert_eq!(run(kind, &op, &z0, 300), run(kind, &op, &z0, 300));
            }
        }

        #[test]
        fn combined_form_matches_two_line_form(seed in any::<u64>(), k in 1usize..10_000, alpha in 2.1f64..10.0) {
            let op = ouyang_xu(6);
            let s = 0.45 / op.lipschitz().unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..50 {
                let (z, zp, vb) = (uniform(12, &mut rng), uniform(12, &mut rng), uniform(12, &mut rng));
                let two = fast_ogda_explicit_step(&op, k, alpha, s, &z, &zp, &vb);
                let comb = fast_ogda_explicit_combined_step(k, alpha, s, &z, &zp, &vb, &two.vbar);
                prop_assert!((&comb - &two.next).norm() <= 1e-14 * two.next.norm().max(1e-300) + 1e-300);
            }
        }

        #[test]
        fn eag_steps_are_positive_and_nonincreasing(l in 0.1f64..10.0, frac in 0.01f64..0.999) {
            let mut s = frac * 0.75 / l;
            for k in 0..2000 {
                let next = eag_next_step(k, s, l).unwrap();
                prop_assert!(next > 0.0 && next <= s);
                s = next;
            }
        }
    }

    #[test]
    fn evaluation_counts_match_a_counting_wrapper() {
        let op = ouyang_xu(5);
        let z0 = Vector::from_element(10, 1.0);
        for kind in SolverKind::ALL {
            let counted = Counting::new(&op);
            let log = run(kind, &counted, &z0, 150);
            assert_eq!(counted.count(), log.evaluations + log.monitor_evaluations, "{kind}");
            if let Some(want) = kind.evaluations_per_iteration() {
                let per = (log.evaluations as f64 / 150.0).round() as usize;
                assert_eq!(per, want, "{kind}");
            }
        }
    }

    #[test]
    fn implicit_steps_meet_the_inner_tolerance() {
        let cubic = Operator::from_fn(2, |z| {
            Vector::from_vec(vec![z[0].powi(3) + z[1], z[1].powi(3) - z[0]])
        });
        let z0 = Vector::from_vec(vec![0.8, -0.6]);
        for op in [ouyang_xu(5), cubic] {
            let z0 = if op.dim() == 2 { z0.clone() } else { Vector::from_element(10, 1.0) };
            let log = run_fast_ogda_implicit(&op, &SolverConfig::new(z0, 1.0).k_max(300), &flat()).unwrap();
            assert_eq!(log.step_residuals.len(), 299);
            assert!(log.step_residuals.iter().all(|&r| r <= 1e-11));
        }
    }

    /// `|z^k|` on `V(z) = z` from `z⁰ = 1`.
    fn scalar_path(kind: SolverKind) -> Vec<f64> {
        let id = Operator::identity(1);
        run(kind, &id, &Vector::from_element(1, 1.0), 10_000).residuals()
    }

    #[test]
    fn scalar_identity_decreases_strictly() {
        for kind in SolverKind::ALL {
            let path = scalar_path(kind);
            for k in 2..path.len() {
                // Below this the squared norm is subnormal.
                if path[k - 1] > 1e-150 {
                    assert!(path[k] < path[k - 1], "{kind} at k = {k}");
                }
            }
        }
    }

    #[test]
    fn scalar_identity_tolerance_and_rates() {
        for kind in [SolverKind::Eg, SolverKind::Ogda] {
            assert!(scalar_path(kind).iter().any(|&r| r <= 1e-6), "{kind}");
        }
        // Anchoring pins the iterate at distance ~ 1/(sk) from the solution.
        for kind in [SolverKind::EagConstant, SolverKind::EagVariable, SolverKind::NesterovEag, SolverKind::HalpernOgda] {
            let path = scalar_path(kind);
            let k = path.len() - 1;
            let kr = k as f64 * path[k];
            assert!(kr > 0.5 && kr < 10.0, "{kind}: k|z^k| = {kr}");
        }
        for kind in [SolverKind::FastOgdaExplicit, SolverKind::FastOgdaImplicit] {
            let path = scalar_path(kind);
            let k = path.len() - 1;
            let kr = (k as f64).powf(1.5) * path[k];
            assert!(kr > 0.1 && kr < 50.0, "{kind}: k^1.5|z^k| = {kr}");
        }
    }

    #[test]
    fn fast_ogda_scaled_residual_stays_bounded() {
        let cases = [
            (Operator::identity(1), Vector::from_element(1, 1.0)),
            (Operator::rotation(), Vector::from_vec(vec![1.0, 1.0])),
        ];
        for (op, z0) in cases {
            let log = run_fast_ogda_explicit(&op, &SolverConfig::new(z0, 0.48).k_max(100_000)).unwrap();
            let at100 = 100.0 * log.records[100].residual;
            for r in &log.records[100..] {
                assert!(r.k as f64 * r.residual <= 1.05 * at100, "k = {}", r.k);
            }
        }
    }
}

mod continuous {
    use super::*;
    use crate::continuous::{integrate, BetaFunction, IntegrateConfig};

    fn config(t_end: f64, alpha: f64, z_star: Option<Vector>) -> IntegrateConfig {
        let mut cfg = IntegrateConfig::new(t_end, alpha);
        cfg.z_star = z_star;
        cfg
    }

    #[test]
    fn energy_dissipates_on_affine_tests() {
        let cases = [
            (Operator::rotation(), Vector::from_vec(vec![1.0, -0.5]), 3.0),
            (ouyang_xu(3), Vector::from_element(6, 1.0), 4.0),
            (Operator::identity(2), Vector::from_vec(vec![2.0, 1.0]), 3.5),
        ];
        for (op, z0, alpha) in cases {
            let z_star = reference_solution(&op, 1e-13).unwrap().z_star;
            let cfg = config(30.0, alpha, Some(z_star.clone()));
            let traj = integrate(&op, &z0, &Vector::zeros(op.dim()), &cfg).unwrap();
            let e: Vec<f64> = traj.samples.iter().map(|s| s.energy.unwrap()).collect();
            let slack = 1e-8 * (1.0 + e[0]);
            assert!(e.windows(2).all(|w| w[1] <= w[0] + slack));
            let bound = (2.0 * e[0]).sqrt() + slack;
            for s in &traj.samples {
                assert!(s.t * s.residual <= bound);
                let inner = (&s.z - &z_star).dot(&op.apply(&s.z));
                assert!(inner >= -1e-12);
            }
        }
    }

    #[test]
    fn runge_kutta_is_fourth_order() {
        let op = Operator::rotation();
        let z0 = Vector::from_vec(vec![1.0, 0.0]);
        let end = |dt: f64| {
            let mut cfg = config(3.0, 3.0, None);
            cfg.dt = dt;
            integrate(&op, &z0, &Vector::zeros(2), &cfg).unwrap().samples.last().unwrap().z.clone()
        };
        let (a, b, c) = (end(0.02), end(0.01), end(0.005));
        let order = ((&a - &b).norm() / (&b - &c).norm()).log2();
        assert!((3.5..=4.5).contains(&order), "order {order}");
    }

    #[test]
    fn scalar_scaled_residual_is_nonincreasing_on_the_tail() {
        let mut cfg = config(100.0, 4.0, None);
        cfg.beta = BetaFunction::constant(1.0).unwrap();
        cfg.sample_every = 100;
        let traj = integrate(&Operator::identity(1), &Vector::from_element(1, 1.0), &Vector::zeros(1), &cfg).unwrap();
        let scaled: Vec<f64> = traj.samples.iter().filter(|s| s.t >= 10.0).map(|s| s.t * s.residual).collect();
        assert!(scaled.windows(2).all(|w| w[1] <= w[0]));
    }
}

mod diagnostics {
    use super::*;
    use crate::diagnostics::{
        energy_implicit, energy_implicit_grouped, explicit_energy_series, implicit_energy_series,
        implicit_lambda_window, k1_threshold, rate_slope, residual_bar_summability,
        tail_monotone_index, velocity_summability, EnergyConfig, Metric,
    };
    use crate::solvers::{run_fast_ogda_explicit, run_fast_ogda_implicit, BetaSchedule, SolverConfig};

    proptest! {
        #[test]
        fn grouped_energy_matches_plain_at_top_lambda(
            seed in any::<u64>(), k in 1usize..1000, alpha in 2.2f64..8.0, rho in 0.0f64..1.0, s in 0.1f64..3.0,
        ) {
            let beta = BetaSchedule::polynomial(1.0, rho * (alpha - 2.0) * 0.9).unwrap();
            let cfg = EnergyConfig { lambda: alpha - 1.0, gamma: 1.0, s, alpha, l: None };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (z, zp, vz, zs) = (uniform(3, &mut rng), uniform(3, &mut rng), uniform(3, &mut rng), uniform(3, &mut rng));
            let a = energy_implicit(k, &z, &zp, &vz, &zs, &cfg, &beta).unwrap();
            let b = energy_implicit_grouped(k, &z, &zp, &vz, &zs, &cfg, &beta).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        }
    }

    #[test]
    fn implicit_energy_dissipates_on_rotation() {
        let op = Operator::rotation();
        let beta = BetaSchedule::constant(1.0).unwrap();
        let (_, _, lambda) = implicit_lambda_window(3.0, &beta).unwrap();
        let cfg = SolverConfig::new(Vector::from_vec(vec![1.0, 1.0]), 1.0).k_max(500).snapshots(true);
        let log = run_fast_ogda_implicit(&op, &cfg, &beta).unwrap();
        let ecfg = EnergyConfig { lambda, gamma: 1.0, s: 1.0, alpha: 3.0, l: None };
        let e: Vec<f64> = implicit_energy_series(&op, &log, &Vector::zeros(2), &ecfg, &beta)
            .unwrap()
            .into_iter()
            .map(|r| r.1)
            .collect();
        assert!(tail_monotone_index(&e, 1e-12 * e[0]).unwrap() <= 30);
        assert!(e.iter().all(|&v| v >= -1e-10));
    }

    #[test]
    fn regularized_energy_on_scalar_identity() {
        let op = Operator::identity(1);
        let (alpha, s, gamma, lambda) = (3.0, 0.4, 1.6, 1.0);
        let cfg = SolverConfig::new(Vector::from_element(1, 1.0), s).k_max(3000).snapshots(true);
        let log = run_fast_ogda_explicit(&op, &cfg).unwrap();
        let ecfg = EnergyConfig { lambda, gamma, s, alpha, l: Some(1.0) };
        let rows = explicit_energy_series(&op, &log, &Vector::zeros(1), &ecfg).unwrap();
        let k1 = k1_threshold(lambda, alpha, gamma);
        let f: Vec<f64> = rows.iter().filter(|r| r.k >= k1).map(|r| r.f).collect();
        assert!(f.iter().all(|&v| v >= -1e-10));
        assert!(tail_monotone_index(&f, 1e-12 * f[0]).unwrap() <= 300);
    }

    #[test]
    fn fast_ogda_velocity_and_summability() {
        let cases = [
            (Operator::identity(1), Vector::from_element(1, 1.0)),
            (Operator::rotation(), Vector::from_vec(vec![1.0, 1.0])),
            (ouyang_xu(5), Vector::zeros(10)),
        ];
        let beta = BetaSchedule::constant(1.0).unwrap();
        for (op, z0) in cases {
            let s = 0.48 / op.lipschitz().unwrap();
            let explicit = run_fast_ogda_explicit(&op, &SolverConfig::new(z0.clone(), s).k_max(20_000)).unwrap();
            let implicit = run_fast_ogda_implicit(&op, &SolverConfig::new(z0, 1.0).k_max(10_000), &beta).unwrap();
            for log in [&explicit, &implicit] {
                assert!(rate_slope(log, Metric::Velocity, 0.5).unwrap().slope <= -0.9);
                assert!(velocity_summability(log).ratio() < 0.01);
            }
            assert!(residual_bar_summability(&explicit).ratio() < 0.01);
        }
    }

    #[test]
    fn explicit_residual_rate_on_structured_instance() {
        let op = ouyang_xu(50);
        let s = 0.48 / op.lipschitz().unwrap();
        let log = run_fast_ogda_explicit(&op, &SolverConfig::new(Vector::zeros(100), s).k_max(20_000)).unwrap();
        assert!(rate_slope(&log, Metric::Residual, 0.5).unwrap().slope <= -0.9);
    }
}

mod bench {
    use super::*;
    use crate::bench::{perf_profile, run_suite, SuiteConfig};
    use crate::solvers::{run_solver, BetaSchedule, SolverConfig};

    fn cost() -> impl Strategy<Value = Option<f64>> {
        prop_oneof![Just(None), (0u32..50).prop_map(|c| Some(c as f64))]
    }

    proptest! {
        #[test]
        fn profiles_are_monotone_and_bounded(t in prop::collection::vec(prop::collection::vec(cost(), 4), 1..30)) {
            let ids: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
            let prof = perf_profile(&ids, &t, 5.0, 50).unwrap();
            for curve in &prof.curves {
                prop_assert!(curve.iter().all(|v| (0.0..=1.0).contains(v)));
                prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
            }
            let mut unique_best = 0.0;
            for (row, r) in t.iter().zip(&prof.r_matrix) {
                if row.iter().any(|c| c.is_some()) {
                    prop_assert!(r.iter().any(|&v| v == 1.0));
                }
                if r.iter().filter(|&&v| v == 1.0).count() == 1 {
                    unique_best += 1.0 / t.len() as f64;
                }
            }
            prop_assert!(unique_best <= 1.0 + 1e-12);
        }
    }

    fn small_suite() -> SuiteConfig {
        let text = "generator = ouyang-xu\npairs = 3x3, 5x5\nmatrices = 1\nstarts = 2\nseed = 3\ntol_op = 1e-4\ntol_vec = 1e-3\nk_max = 3000\n";
        SuiteConfig::parse(text).unwrap()
    }

    #[test]
    fn suites_are_deterministic() {
        let spec = small_suite().build().unwrap();
        let a = run_suite(&spec).unwrap();
        let b = run_suite(&spec).unwrap();
        assert_eq!(a.iteration_matrix(), b.iteration_matrix());
        assert_eq!(a.evaluation_matrix(), b.evaluation_matrix());
    }

    #[test]
    fn costs_match_a_scan_of_the_full_run() {
        let spec = small_suite().build().unwrap();
        let result = run_suite(&spec).unwrap();
        let beta = BetaSchedule::constant(1.0).unwrap();
        let mut solved = 0;
        for (p, row) in spec.problems.iter().zip(&result.outcomes) {
            let op = saddle_operator(&p.instance().unwrap(), None).unwrap();
            let l = op.lipschitz().unwrap();
            for (s, out) in spec.solvers.iter().zip(row) {
                let cfg = SolverConfig::new(p.start(), s.kind.default_step(l))
                    .alpha(s.alpha)
                    .k_max(spec.stop.k_max)
                    .snapshots(true);
                let log = run_solver(s.kind, &op, &cfg, &beta).unwrap();
                let r0 = log.records[0].residual;
                let first = log.records.iter().skip(1).find(|r| {
                    let z = &log.snapshot(r.k).unwrap().z;
                    r.residual / r0 <= spec.stop.tol_op
                        && r.velocity.unwrap() / (z.norm() + 1.0) <= spec.stop.tol_vec
                });
                assert_eq!(out.iterations, first.map(|r| r.k), "{} {}", p.id, s.id);
                solved += usize::from(first.is_some());
            }
        }
        assert!(solved > 0);
    }

    #[test]
    fn dense_reference_for_random_instances() {
        let p = build_random_sparse(4, 3, 1.0, 5).unwrap();
        let (m, q) = p.affine_parts();
        let z = Vector::from_fn(7, |i, _| i as f64 - 3.0);
        let dense: Matrix = m.clone();
        assert_relative_eq!(dense * &z + q, saddle_by_hand(&p, &z), epsilon = 1e-12);
    }
}
