mod common;

use std::cell::Cell;

use common::instances::{single_berth, two_half_clash};
use mpbap_core::colgen::Column;
use mpbap_core::graph::Node;
use mpbap_core::model::{generate_instance, generate_micro, GeneratorParams, WindowMode};
use mpbap_core::oracle::{enumerate_optimum, OracleCaps};
use mpbap_core::search::{
    branch, solve, BranchCandidate, CutPolicy, InfeasibilityCertificate, SolveOptions, SolveStatus,
};
use mpbap_core::{Clock, NullClock};
use proptest::prelude::*;

/// Clock that advances by a fixed step every time it is read.
struct StepClock {
    t: Cell<f64>,
    step: f64,
}

impl StepClock {
    fn new(step: f64) -> Self {
        StepClock { t: Cell::new(0.0), step }
    }
}

impl Clock for StepClock {
    fn now(&self) -> f64 {
        let t = self.t.get();
        self.t.set(t + self.step);
        t
    }
}

fn opts(cut_policy: CutPolicy) -> SolveOptions {
    SolveOptions { cut_policy, ..SolveOptions::default() }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * (1.0 + b.abs())
}

fn generated(ships: usize, berths: usize, ports: usize, windows: WindowMode, seed: u64) -> mpbap_core::model::Instance {
    generate_instance(GeneratorParams { ships, berths_per_port: berths, ports, windows, seed }).unwrap()
}

#[test]
fn single_ship_is_solved_at_the_root() {
    let inst = single_berth(20, 1, &[(4, 2, 8)]);
    let out = solve(&inst, &opts(CutPolicy::None), &NullClock).unwrap();
    assert_eq!(out.report.status, SolveStatus::Optimal);
    assert_eq!(out.report.nodes, 1);
    assert_eq!(out.report.gap_percent, Some(0.0));
    // Berths on arrival, 4 h of handling, no delay.
    assert!(close(out.report.objective.unwrap(), 4.0 * 200.0));
}

#[test]
fn half_clash_needs_branching_without_cuts_but_not_with_them() {
    let inst = two_half_clash();
    let plain = solve(&inst, &opts(CutPolicy::None), &NullClock).unwrap();
    let cut = solve(&inst, &opts(CutPolicy::Root), &NullClock).unwrap();
    assert!(plain.report.nodes > 1);
    assert_eq!(cut.report.nodes, 1);
    assert!(close(plain.report.objective.unwrap(), cut.report.objective.unwrap()));
    assert!(cut.report.root_lower_bound.unwrap() > plain.report.root_lower_bound.unwrap() + 1.0);
}

#[test]
fn split_berth_types_give_the_same_optimum() {
    for seed in 0..3 {
        let inst = generated(4, 2, 3, WindowMode::Tight, seed);
        let a = solve(&inst, &opts(CutPolicy::Root), &NullClock).unwrap();
        let split = inst.with_split_berth_types();
        let b = solve(&split, &opts(CutPolicy::Root), &NullClock).unwrap();
        assert_eq!(a.report.status, SolveStatus::Optimal);
        assert_eq!(b.report.status, SolveStatus::Optimal);
        assert!(close(a.report.objective.unwrap(), b.report.objective.unwrap()), "seed {seed}");
        assert!(a.plan.unwrap().is_proper_coloring(&inst));
        assert!(b.plan.unwrap().is_proper_coloring(&split));
    }
}

#[test]
fn plans_are_proper_colorings_with_one_row_per_call() {
    for seed in 0..40 {
        let inst = generate_micro(seed);
        let out = solve(&inst, &opts(CutPolicy::All), &NullClock).unwrap();
        let Some(plan) = out.plan else { continue };
        assert!(plan.is_proper_coloring(&inst), "seed {seed}");
        let calls: usize = inst.ships.iter().map(|s| s.route.len()).sum();
        assert_eq!(plan.rows.len(), calls);
    }
}

#[test]
fn solving_is_deterministic() {
    let inst = generated(6, 2, 3, WindowMode::Tight, 7);
    let a = solve(&inst, &opts(CutPolicy::All), &NullClock).unwrap();
    let b = solve(&inst, &opts(CutPolicy::All), &NullClock).unwrap();
    assert_eq!(a.report.objective, b.report.objective);
    assert_eq!(a.report.nodes, b.report.nodes);
    assert_eq!(a.report.columns, b.report.columns);
    assert_eq!(a.columns, b.columns);
    assert_eq!(a.cuts, b.cuts);
}

#[test]
fn cuts_never_lower_the_root_bound_and_bounds_stay_below_the_optimum() {
    for seed in 0..80 {
        let inst = generate_micro(seed);
        let plain = solve(&inst, &opts(CutPolicy::None), &NullClock).unwrap();
        let cut = solve(&inst, &opts(CutPolicy::Root), &NullClock).unwrap();
        assert_eq!(plain.report.status, cut.report.status, "seed {seed}");
        if plain.report.status != SolveStatus::Optimal {
            continue;
        }
        let (r0, r1) = (plain.report.root_lower_bound.unwrap(), cut.report.root_lower_bound.unwrap());
        let z = plain.report.objective.unwrap();
        assert!(r1 >= r0 - 1e-6 * (1.0 + r0.abs()), "seed {seed}: {r1} < {r0}");
        assert!(r1 <= z + 1e-6 * (1.0 + z.abs()), "seed {seed}: root {r1} above optimum {z}");
        assert!(plain.report.lower_bound <= z + 1e-9);
    }
}

#[test]
fn unreachable_window_certifies_the_ship() {
    // Handling longer than the window.
    let inst = single_berth(5, 1, &[(3, 0, 3), (7, 0, 7)]);
    let out = solve(&inst, &opts(CutPolicy::None), &NullClock).unwrap();
    assert_eq!(out.report.status, SolveStatus::Infeasible);
    assert_eq!(out.report.infeasibility, Some(InfeasibilityCertificate::Ship(1)));
    assert!(out.plan.is_none());
}

#[test]
fn joint_clash_is_certified() {
    let inst = single_berth(5, 1, &[(3, 0, 3), (3, 0, 3)]);
    let out = solve(&inst, &opts(CutPolicy::None), &NullClock).unwrap();
    assert_eq!(out.report.status, SolveStatus::Infeasible);
    assert_eq!(out.report.infeasibility, Some(InfeasibilityCertificate::Clash));
    assert_eq!(enumerate_optimum(&inst, &OracleCaps::default()).unwrap().cost, None);
}

#[test]
fn expired_budget_reports_time_limit_without_incumbent() {
    let inst = generated(4, 2, 3, WindowMode::Tight, 1);
    let options = SolveOptions { time_limit: 0.0, ..opts(CutPolicy::None) };
    let out = solve(&inst, &options, &StepClock::new(1.0)).unwrap();
    assert_eq!(out.report.status, SolveStatus::TimeLimit);
    assert_eq!(out.report.objective, None);
    assert_eq!(out.report.nodes, 0);
}

#[test]
fn interrupted_search_falls_back_to_the_restricted_mip() {
    let inst = two_half_clash();
    let optimum = solve(&inst, &opts(CutPolicy::None), &NullClock).unwrap().report.objective.unwrap();
    let options = SolveOptions { max_nodes: 1, time_limit: 60.0, ..opts(CutPolicy::None) };
    let out = solve(&inst, &options, &StepClock::new(1e-4)).unwrap();
    assert!(out.report.final_mip_used);
    assert!(matches!(out.report.status, SolveStatus::Feasible | SolveStatus::Optimal | SolveStatus::TimeLimit));
    if let Some(z) = out.report.objective {
        assert!(z >= optimum - 1e-6);
        assert!(out.report.lower_bound <= z + 1e-9);
        assert!(out.report.lower_bound <= optimum + 1e-6);
        assert!(out.plan.unwrap().is_proper_coloring(&inst));
    }
}

#[test]
fn time_budget_is_honoured_by_an_advancing_clock() {
    let inst = generated(8, 2, 3, WindowMode::Loose, 3);
    let options = SolveOptions { time_limit: 5.0, ..opts(CutPolicy::None) };
    let out = solve(&inst, &options, &StepClock::new(0.01)).unwrap();
    // One clock read may overshoot the deadline before the check.
    assert!(out.report.wall_seconds <= 5.0 * (1.0 + options.final_mip_fraction) + 1.0, "{}", out.report.wall_seconds);
    assert_ne!(out.report.status, SolveStatus::Infeasible);
}

fn column(ship: usize, visits: &[(usize, usize, i64)]) -> Column {
    Column {
        ship,
        visits: visits.iter().map(|&(port, berth_type, time)| Node { port, berth_type, time }).collect(),
        nodes: vec![0; visits.len()],
        speeds: Vec::new(),
        cost: 0.0,
    }
}

proptest! {
    #[test]
    fn branches_partition_the_columns_of_the_branched_ship(
        mean in 0.0f64..40.0,
        types in proptest::collection::btree_set(0usize..5, 2..5),
        split in 1usize..4,
        times in proptest::collection::vec((0i64..50, 0usize..5), 1..20),
    ) {
        let types: Vec<usize> = types.into_iter().collect();
        let left = types[..split.min(types.len() - 1)].to_vec();
        let candidates = [
            BranchCandidate::Time { ship: 1, port: 2, mean, deviation: 1.0 },
            BranchCandidate::BerthType { ship: 1, port: 2, left },
        ];
        for cand in &candidates {
            let (l, r) = branch(cand);
            for &(t, k) in &times {
                let own = column(1, &[(0, 0, t), (2, k, t + 3)]);
                prop_assert!(l.admits_column(&own) != r.admits_column(&own));
                let other = column(0, &[(2, k, t)]);
                prop_assert!(l.admits_column(&other) && r.admits_column(&other));
            }
        }
    }
}
