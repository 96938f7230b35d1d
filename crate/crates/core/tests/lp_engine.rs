mod common;

use common::dense_simplex::{dense_solve, DenseResult};
use mpbap_core::lp::{lp_solve, LinearProgram, LpStatus, Sense, Simplex, Tolerances};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lp(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> LinearProgram {
    let mut lp = LinearProgram::new();
    let mut x0 = Vec::new();
    for _ in 0..n {
        let lo = [-2.0, 0.0, 0.0, 1.0][rng.gen_range(0..4)];
        let up = if rng.gen_bool(0.85) { lo + rng.gen_range(1..6) as f64 } else { f64::INFINITY };
        let cost = rng.gen_range(-6..=6) as f64;
        lp.add_variable(cost, lo, up);
        let span = if up.is_finite() { up - lo } else { 4.0 };
        x0.push(lo + rng.gen_range(0.0..1.0) * span);
    }
    let feasible = rng.gen_bool(0.85);
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(density) {
                let a = rng.gen_range(-5..=5) as f64;
                if a != 0.0 {
                    coeffs.push((j, a));
                }
            }
        }
        let act: f64 = coeffs.iter().map(|&(j, a)| a * x0[j]).sum();
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.gen_range(0..3)];
        let rhs = if feasible {
            match sense {
                Sense::Le => (act + rng.gen_range(0.0..3.0)).round(),
                Sense::Ge => (act - rng.gen_range(0.0..3.0)).round(),
                Sense::Eq => act,
            }
        } else {
            rng.gen_range(-10..=10) as f64
        };
        // rounding may cut x0 off; widen by one
        let rhs = match sense {
            Sense::Le if feasible && rhs < act => rhs + 1.0,
            Sense::Ge if feasible && rhs > act => rhs - 1.0,
            _ => rhs,
        };
        lp.add_row(coeffs, sense, rhs);
    }
    lp
}

fn check_certificates(lp: &LinearProgram, sol: &mpbap_core::lp::LpSolution) {
    let tol = Tolerances::default();
    let scale = 1.0 + sol.objective.abs();
    assert!(lp.max_violation(&sol.primal) <= 1e-7 * 10.0, "primal violation {}", lp.max_violation(&sol.primal));
    let dual_obj = sol.dual_objective(lp);
    assert!((dual_obj - sol.objective).abs() <= 1e-6 * scale, "duality gap {} vs {}", dual_obj, sol.objective);
    let act = lp.activities(&sol.primal);
    for (i, row) in lp.rows.iter().enumerate() {
        let y = sol.duals[i];
        match row.sense {
            Sense::Le => assert!(y <= tol.optimality),
            Sense::Ge => assert!(y >= -tol.optimality),
            Sense::Eq => {}
        }
        if y.abs() > 1e-6 {
            assert!((act[i] - row.rhs).abs() <= 1e-6, "slack with nonzero dual in row {i}");
        }
    }
    for j in 0..lp.num_vars() {
        let d = sol.reduced_costs[j];
        if d > 1e-6 {
            assert!((sol.primal[j] - lp.lower[j]).abs() <= 1e-7);
        } else if d < -1e-6 {
            assert!((sol.primal[j] - lp.upper[j]).abs() <= 1e-7);
        }
    }
}

#[test]
fn single_lower_bound_row() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable(1.0, 0.0, f64::INFINITY);
    lp.add_row(vec![(x, 1.0)], Sense::Ge, 3.0);
    let (sol, _) = lp_solve(&lp, None).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.primal[x] - 3.0).abs() < 1e-12);
    assert!((sol.duals[0] - 1.0).abs() < 1e-12);
}

#[test]
fn symmetric_vertex_objective_and_dual() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable(-1.0, 0.0, f64::INFINITY);
    let y = lp.add_variable(-1.0, 0.0, f64::INFINITY);
    lp.add_row(vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
    let (sol, _) = lp_solve(&lp, None).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert!((sol.objective + 1.0).abs() < 1e-12);
    assert!((sol.duals[0] + 1.0).abs() < 1e-12);
}

#[test]
fn infeasible_status() {
    let mut lp = LinearProgram::new();
    let x = lp.add_variable(0.0, 0.0, 1.0);
    lp.add_row(vec![(x, 1.0)], Sense::Ge, 2.0);
    let (sol, _) = lp_solve(&lp, None).unwrap();
    assert_eq!(sol.status, LpStatus::Infeasible);
}

#[test]
fn malformed_program_is_rejected() {
    let mut lp = LinearProgram::new();
    lp.add_variable(0.0, 0.0, 1.0);
    lp.add_row(vec![(3, 1.0)], Sense::Le, 1.0);
    assert!(lp_solve(&lp, None).is_err());
}

#[test]
fn random_10x10_match_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut optimal = 0;
    for case in 0..400 {
        let lp = random_lp(&mut rng, 10, 10, 0.5);
        let (sol, _) = lp_solve(&lp, None).unwrap();
        match dense_solve(&lp) {
            DenseResult::Optimal(v) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - v).abs() <= 1e-6 * (1.0 + v.abs()), "case {case}: {} vs {v}", sol.objective);
                check_certificates(&lp, &sol);
                optimal += 1;
            }
            DenseResult::Infeasible => assert_eq!(sol.status, LpStatus::Infeasible, "case {case}"),
            DenseResult::Unbounded => assert_eq!(sol.status, LpStatus::Unbounded, "case {case}"),
        }
    }
    assert!(optimal > 200);
}

#[test]
fn larger_sparse_programs_match_dense_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..6 {
        let lp = random_lp(&mut rng, 60, 120, 0.08);
        let (sol, _) = lp_solve(&lp, None).unwrap();
        match dense_solve(&lp) {
            DenseResult::Optimal(v) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - v).abs() <= 1e-6 * (1.0 + v.abs()));
                check_certificates(&lp, &sol);
            }
            DenseResult::Infeasible => assert_eq!(sol.status, LpStatus::Infeasible),
            DenseResult::Unbounded => assert_eq!(sol.status, LpStatus::Unbounded),
        }
    }
}

#[test]
fn warm_basis_resolves_in_zero_pivots() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let lp = loop {
        let lp = random_lp(&mut rng, 8, 12, 0.5);
        if matches!(dense_solve(&lp), DenseResult::Optimal(_)) {
            break lp;
        }
    };
    let (cold, basis) = lp_solve(&lp, None).unwrap();
    let (warm, _) = lp_solve(&lp, Some(&basis)).unwrap();
    assert_eq!(warm.iterations, 0);
    assert!((warm.objective - cold.objective).abs() < 1e-9);
}

#[test]
fn incremental_changes_match_cold_solves() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 40 {
        let mut lp = random_lp(&mut rng, 8, 8, 0.5);
        if !matches!(dense_solve(&lp), DenseResult::Optimal(_)) {
            continue;
        }
        let mut s = Simplex::from_program(&lp, Tolerances::default());
        assert_eq!(s.solve(), LpStatus::Optimal);

        let mut coeffs = Vec::new();
        for j in 0..lp.num_vars() {
            if rng.gen_bool(0.4) {
                coeffs.push((j, rng.gen_range(-3..=3) as f64));
            }
        }
        let rhs = rng.gen_range(-2..=6) as f64;
        lp.add_row(coeffs.clone(), Sense::Le, rhs);
        s.add_row(&coeffs, Sense::Le, rhs);
        let j = rng.gen_range(0..lp.num_vars());
        let (lo, up) = (lp.lower[j], lp.upper[j].min(lp.lower[j] + 1.0));
        lp.upper[j] = up;
        s.set_bounds(j, lo, up);
        let mut entries = Vec::new();
        for i in 0..lp.num_rows() {
            if rng.gen_bool(0.5) {
                entries.push((i, rng.gen_range(-2..=2) as f64));
            }
        }
        let c = rng.gen_range(-4..=4) as f64;
        let v = lp.add_variable(c, 0.0, 2.0);
        for &(i, a) in &entries {
            lp.rows[i].coeffs.push((v, a));
        }
        s.add_column(c, 0.0, 2.0, &entries);

        let status = s.solve();
        match dense_solve(&lp) {
            DenseResult::Optimal(opt) => {
                assert_eq!(status, LpStatus::Optimal);
                assert!((s.objective() - opt).abs() <= 1e-6 * (1.0 + opt.abs()));
                check_certificates(&lp, &s.solution());
            }
            DenseResult::Infeasible => assert_eq!(status, LpStatus::Infeasible),
            DenseResult::Unbounded => assert_eq!(status, LpStatus::Unbounded),
        }
        checked += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn column_with_nonnegative_reduced_cost_leaves_objective(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 6, 6, 0.5);
        let mut s = Simplex::from_program(&lp, Tolerances::default());
        prop_assume!(s.solve() == LpStatus::Optimal);
        let before = s.objective();
        let entries: Vec<(usize, f64)> = (0..lp.num_rows()).map(|i| (i, rng.gen_range(-3..=3) as f64)).collect();
        let price: f64 = entries.iter().map(|&(i, a)| a * s.dual(i)).sum();
        let cost = price + rng.gen_range(0.0..2.0);
        s.add_column(cost, 0.0, f64::INFINITY, &entries);
        prop_assert_eq!(s.solve(), LpStatus::Optimal);
        prop_assert!((s.objective() - before).abs() <= 1e-6 * (1.0 + before.abs()));
    }

    #[test]
    fn strong_duality_on_random_programs(seed in 0u64..10_000, m in 1usize..12, n in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, m, n, 0.6);
        let (sol, _) = lp_solve(&lp, None).unwrap();
        if sol.status == LpStatus::Optimal {
            check_certificates(&lp, &sol);
        }
    }

    #[test]
    fn solves_are_deterministic(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_lp(&mut rng, 7, 9, 0.5);
        let (a, ba) = lp_solve(&lp, None).unwrap();
        let (b, bb) = lp_solve(&lp, None).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(ba, bb);
    }
}
