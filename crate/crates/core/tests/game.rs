mod common;

use common::dense_simplex::{dense_solve, DenseResult};
use mpbap_core::game::{
    analyze, carriers, characteristic_function, coalition_plan, epm, shapley, terminal_costs, CoalitionGame, EpmOutcome,
};
use mpbap_core::graph::voyage_cost;
use mpbap_core::lp::{LinearProgram, Sense};
use mpbap_core::model::{generate_instance, GeneratorParams, Instance, WindowMode};
use mpbap_core::search::{solve, CutPolicy, SolveOptions};
use mpbap_core::NullClock;
use proptest::prelude::*;
use proptest::strategy::ValueTree;

/// Values in mask order for players A, B, C.
fn three(a: f64, b: f64, c: f64, ab: f64, ac: f64, bc: f64, abc: f64) -> CoalitionGame {
    CoalitionGame::new(3, vec![0.0, a, b, ab, c, ac, bc, abc]).unwrap()
}

#[test]
fn averaged_three_carrier_game() {
    let g = three(386891.0, 218635.0, 296361.0, 590586.0, 645133.0, 502188.0, 856210.0);
    let x = shapley(&g).costs;
    for (got, want) in x.iter().zip([367092.0, 211491.0, 277627.0]) {
        assert!((got - want).abs() <= 1.0, "{got} vs {want}");
    }
    let alloc = shapley(&g);
    for (got, want) in alloc.relative_savings.iter().zip([0.051, 0.033, 0.063]) {
        assert!((got - want).abs() < 5e-4, "{got} vs {want}");
    }
    for (got, want) in alloc.savings_share.iter().zip([0.433, 0.156, 0.410]) {
        assert!((got - want).abs() < 5e-4, "{got} vs {want}");
    }
}

#[test]
fn empty_core_from_a_cheap_pair() {
    // AC cheaper than any efficient split can give A and C together.
    let g = three(386891.0, 218635.0, 296361.0, 590586.0, 550000.0, 502188.0, 856210.0);
    assert_eq!(epm(&g).unwrap(), EpmOutcome::CoreEmpty);
    assert!(!shapley(&g).stable);
}

/// The core system alone: efficiency, coalition caps and nonnegativity.
fn core_system(g: &CoalitionGame) -> LinearProgram {
    let n = g.players();
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        lp.add_variable(0.0, 0.0, f64::INFINITY);
    }
    lp.add_row((0..n).map(|i| (i, 1.0)).collect(), Sense::Eq, g.value(g.grand()));
    for m in 1..g.grand() {
        lp.add_row((0..n).filter(|i| m >> i & 1 == 1).map(|i| (i, 1.0)).collect(), Sense::Le, g.value(m));
    }
    lp
}

fn game_strategy() -> impl Strategy<Value = CoalitionGame> {
    (1usize..=5).prop_flat_map(|n| {
        (proptest::collection::vec(10.0f64..1000.0, n), proptest::collection::vec(0.0f64..0.4, 1 << n)).prop_map(move |(a, r)| {
            CoalitionGame::from_fn(n, |m| {
                let base: f64 = (0..n).filter(|i| m >> i & 1 == 1).map(|i| a[i]).sum();
                if m.count_ones() == 1 { base } else { base * (1.0 - r[m]) }
            })
            .unwrap()
        })
    })
}

fn permute(g: &CoalitionGame, perm: &[usize]) -> CoalitionGame {
    // Player i of the new game is player perm[i] of the old one.
    CoalitionGame::from_fn(g.players(), |m| {
        let old = (0..g.players()).filter(|i| m >> i & 1 == 1).fold(0, |acc, i| acc | 1 << perm[i]);
        g.value(old)
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn shapley_is_efficient(g in game_strategy()) {
        let total: f64 = shapley(&g).costs.iter().sum();
        let v = g.value(g.grand());
        prop_assert!((total - v).abs() <= 1e-9 * (1.0 + v.abs()));
    }

    #[test]
    fn shapley_treats_symmetric_players_equally(g in game_strategy()) {
        prop_assume!(g.players() >= 2);
        // Make players 0 and 1 interchangeable.
        let swap = |m: usize| (m & !3) | (m & 1) << 1 | (m >> 1 & 1);
        let sym = CoalitionGame::from_fn(g.players(), |m| 0.5 * (g.value(m) + g.value(swap(m)))).unwrap();
        let x = shapley(&sym).costs;
        prop_assert!((x[0] - x[1]).abs() <= 1e-9 * (1.0 + x[0].abs()));
    }

    #[test]
    fn shapley_ignores_labels(g in game_strategy(), seed in any::<u64>()) {
        let n = g.players();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let x = shapley(&g).costs;
        let y = shapley(&permute(&g, &perm)).costs;
        for i in 0..n {
            prop_assert!((y[i] - x[perm[i]]).abs() <= 1e-9 * (1.0 + x[perm[i]].abs()));
        }
    }

    #[test]
    fn shapley_is_linear(g in game_strategy(), a in 0.1f64..3.0, b in 0.1f64..3.0, shift in 1.0f64..50.0) {
        let n = g.players();
        let h = CoalitionGame::from_fn(n, |m| g.value(m) + shift * m.count_ones() as f64 + (m % 7) as f64).unwrap();
        let mix = CoalitionGame::from_fn(n, |m| a * g.value(m) + b * h.value(m)).unwrap();
        let (xg, xh, xm) = (shapley(&g).costs, shapley(&h).costs, shapley(&mix).costs);
        for i in 0..n {
            let want = a * xg[i] + b * xh[i];
            prop_assert!((xm[i] - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn epm_is_stable_or_the_core_is_empty(g in game_strategy()) {
        let direct = dense_solve(&core_system(&g));
        match epm(&g).unwrap() {
            EpmOutcome::Stable { allocation, max_difference } => {
                prop_assert!(matches!(direct, DenseResult::Optimal(_)));
                let x = &allocation.costs;
                let total: f64 = x.iter().sum();
                prop_assert!((total - g.value(g.grand())).abs() <= 1e-6 * (1.0 + total.abs()));
                for m in 1..g.grand() {
                    let sum: f64 = (0..g.players()).filter(|i| m >> i & 1 == 1).map(|i| x[i]).sum();
                    prop_assert!(g.value(m) - sum >= -1e-6 * (1.0 + sum.abs()), "mask {}", m);
                }
                prop_assert!(x.iter().all(|&v| v >= -1e-6));
                prop_assert!(allocation.stable);
                let rel: Vec<f64> = (0..g.players()).map(|i| x[i] / g.value(1 << i)).collect();
                let spread = rel.iter().cloned().fold(f64::MIN, f64::max) - rel.iter().cloned().fold(f64::MAX, f64::min);
                prop_assert!((spread - max_difference).abs() <= 1e-6);
            }
            EpmOutcome::CoreEmpty => prop_assert_eq!(direct, DenseResult::Infeasible),
        }
    }
}

#[test]
fn random_games_reach_both_outcomes() {
    let mut runner = proptest::test_runner::TestRunner::deterministic();
    let (mut stable, mut empty) = (0, 0);
    for _ in 0..200 {
        let g = game_strategy().new_tree(&mut runner).unwrap().current();
        match epm(&g).unwrap() {
            EpmOutcome::Stable { .. } => stable += 1,
            EpmOutcome::CoreEmpty => empty += 1,
        }
    }
    assert!(stable > 10 && empty > 10, "{stable} stable, {empty} empty");
}

fn game_instance(ships: usize, seed: u64) -> Instance {
    generate_instance(GeneratorParams { ships, berths_per_port: 1, ports: 2, windows: WindowMode::Tight, seed })
        .unwrap()
        .with_expanded_windows(1.2)
}

fn options() -> SolveOptions {
    SolveOptions { cut_policy: CutPolicy::Root, ..SolveOptions::default() }
}

#[test]
fn top_priority_coalitions_ignore_outsiders() {
    let inst = game_instance(4, 0);
    let players = carriers(&inst);
    assert_eq!(players.len(), 3);
    let priority = [1, 2, 3];
    // The grand coalition and the top carrier face no reservations.
    let grand = characteristic_function(&inst, &priority, 7, &options(), &NullClock).unwrap();
    assert!((grand - solve(&inst, &options(), &NullClock).unwrap().report.objective.unwrap()).abs() < 1e-6);
    let mut alone = inst.clone();
    alone.ships.retain(|s| s.carrier == players[0].0);
    let a = characteristic_function(&inst, &priority, 1, &options(), &NullClock).unwrap();
    assert!((a - solve(&alone, &options(), &NullClock).unwrap().report.objective.unwrap()).abs() < 1e-6);
}

#[test]
fn coalition_costs_never_beat_unconstrained_schedules() {
    for seed in 0..3 {
        let inst = game_instance(4, seed);
        let players = carriers(&inst);
        for mask in 1..8usize {
            let Ok(plan) = coalition_plan(&inst, &[1, 2, 3], mask, &options(), &NullClock) else { continue };
            let mut own = inst.clone();
            let keep: Vec<usize> = (0..3).filter(|i| mask >> i & 1 == 1).map(|i| players[i].0).collect();
            own.ships.retain(|s| keep.contains(&s.carrier));
            let free = solve(&own, &options(), &NullClock).unwrap().report.objective.unwrap();
            assert!(plan.cost >= free - 1e-6, "seed {seed} mask {mask}");
            let sum: f64 = plan.columns.iter().map(|c| voyage_cost(&inst, c.ship, &c.visits, &c.speeds).total()).sum();
            assert!((sum - plan.cost).abs() < 1e-6);
        }
    }
}

#[test]
fn full_analysis_is_consistent() {
    let inst = game_instance(6, 0);
    let a = analyze(&inst, &[1, 2, 3], &options(), &NullClock).unwrap();
    assert_eq!(a.coalitions.len(), 7);
    let values: Vec<f64> = a.coalitions.iter().map(|c| c.cost.unwrap()).collect();
    let g = CoalitionGame::new(3, std::iter::once(0.0).chain(values).collect()).unwrap();
    // Sharing berths pays off here.
    assert!(g.value(7) < g.value(1) + g.value(2) + g.value(4) - 1.0);
    assert_eq!(a.shapley.as_ref().unwrap().costs, shapley(&g).costs);
    match (a.epm.as_ref().unwrap(), epm(&g).unwrap()) {
        (EpmOutcome::Stable { allocation: x, .. }, EpmOutcome::Stable { allocation: y, .. }) => assert_eq!(x.costs, y.costs),
        (EpmOutcome::CoreEmpty, EpmOutcome::CoreEmpty) => {}
        (x, y) => panic!("{x:?} vs {y:?}"),
    }
    assert_eq!(a.superadditivity_violations, g.superadditivity_violations(1e-6));

    let terminal = a.terminal.unwrap();
    assert_eq!(terminal.len(), inst.ports.len());
    let grand = coalition_plan(&inst, &[1, 2, 3], 7, &options(), &NullClock).unwrap();
    let per_port = terminal_costs(&inst, &grand.columns);
    let mut hd = 0.0;
    for c in &grand.columns {
        let b = voyage_cost(&inst, c.ship, &c.visits, &c.speeds);
        hd += b.handling + b.delay;
    }
    assert!((per_port.iter().sum::<f64>() - hd).abs() < 1e-6);
    for (t, g) in terminal.iter().zip(&per_port) {
        assert!((t.grand - g).abs() < 1e-6);
    }
}
