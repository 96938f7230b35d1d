//! Best-first branch-and-cut-and-price.
//!
//! Each tree node runs column generation to convergence, optionally
//! followed by cut rounds, and branches on the berthing time of the
//! `(ship, port)` pair whose λ-weighted berthing times spread the most.
//! Branching is enforced by disabling incompatible pooled columns and by
//! removing forbidden graph nodes from pricing. When the time limit
//! interrupts the tree, a binary program over all pooled columns gets a
//! share of the budget.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::colgen::{column_generation, seed_columns, CgStats, CgStatus, Column, Master, NodeFilter};
use crate::cuts::{separate_cuts, Cut};
use crate::graph::{voyage_cost, CostBreakdown, GraphError, Node, VoyageGraph};
use crate::lp::{branch_and_bound_binary, BnbOptions, BnbStatus};
use crate::model::Instance;
use crate::Clock;

const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutPolicy {
    #[default]
    None,
    Root,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub cut_policy: CutPolicy,
    /// Seconds; infinite for no limit.
    pub time_limit: f64,
    /// Share of the time limit given to the final restricted binary program.
    pub final_mip_fraction: f64,
    /// Separation rounds per tree node.
    pub max_cut_rounds: usize,
    pub max_nodes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { cut_policy: CutPolicy::None, time_limit: f64::INFINITY, final_mip_fraction: 0.1, max_cut_rounds: 20, max_nodes: usize::MAX }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    TimeAtMost(i64),
    TimeAtLeast(i64),
    TypeIn(Vec<usize>),
    TypeNotIn(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchConstraint {
    pub ship: usize,
    pub port: usize,
    pub kind: BranchKind,
}

impl BranchConstraint {
    /// Whether berthing at `visit` is allowed for this constraint's ship.
    pub fn admits(&self, visit: Node) -> bool {
        if visit.port != self.port {
            return true;
        }
        match &self.kind {
            BranchKind::TimeAtMost(t) => visit.time <= *t,
            BranchKind::TimeAtLeast(t) => visit.time >= *t,
            BranchKind::TypeIn(set) => set.contains(&visit.berth_type),
            BranchKind::TypeNotIn(set) => !set.contains(&visit.berth_type),
        }
    }

    pub fn admits_column(&self, column: &Column) -> bool {
        column.ship != self.ship || column.visit_at(self.port).is_none_or(|v| self.admits(v))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BranchCandidate {
    Time { ship: usize, port: usize, mean: f64, deviation: f64 },
    /// Zero time spread: split the used berth types of `(ship, port)`.
    BerthType { ship: usize, port: usize, left: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SearchError {
    #[error("branching requested on an integral solution")]
    IntegralSolution,
    #[error("LP engine failed on the master problem")]
    Numerical,
}

/// Whether every λ is within tolerance of 0 or 1.
pub fn is_integral(solution: &[(&Column, f64)]) -> bool {
    solution.iter().all(|(_, v)| (v - libm::round(*v)).abs() <= INTEGRALITY_TOL)
}

/// Chooses the branching pair from a fractional solution.
pub fn select_branch_candidate(solution: &[(&Column, f64)]) -> Result<BranchCandidate, SearchError> {
    if is_integral(solution) {
        return Err(SearchError::IntegralSolution);
    }
    // (ship, port) -> [(time, type, λ)]
    let mut groups: BTreeMap<(usize, usize), Vec<(i64, usize, f64)>> = BTreeMap::new();
    for (col, v) in solution {
        if *v <= INTEGRALITY_TOL {
            continue;
        }
        for visit in &col.visits {
            groups.entry((col.ship, visit.port)).or_default().push((visit.time, visit.berth_type, *v));
        }
    }
    let mut best: Option<BranchCandidate> = None;
    let mut best_dev = 1e-9;
    for (&(ship, port), g) in &groups {
        let w: f64 = g.iter().map(|x| x.2).sum();
        let mean = g.iter().map(|x| x.0 as f64 * x.2).sum::<f64>() / w;
        let var = g.iter().map(|x| (x.0 as f64 - mean) * (x.0 as f64 - mean) * x.2).sum::<f64>() / w;
        let deviation = libm::sqrt(var.max(0.0));
        if deviation > best_dev {
            best_dev = deviation;
            best = Some(BranchCandidate::Time { ship, port, mean, deviation });
        }
    }
    if let Some(c) = best {
        return Ok(c);
    }
    let mut fallback: Option<(usize, usize, Vec<usize>)> = None;
    for (&(ship, port), g) in &groups {
        let mut types: Vec<usize> = g.iter().map(|x| x.1).collect();
        types.sort_unstable();
        types.dedup();
        if types.len() > 1 && fallback.as_ref().is_none_or(|f| types.len() > f.2.len()) {
            fallback = Some((ship, port, types));
        }
    }
    let (ship, port, types) = fallback.ok_or(SearchError::IntegralSolution)?;
    let left = types[..types.len() / 2].to_vec();
    Ok(BranchCandidate::BerthType { ship, port, left })
}

/// The two child constraints; their admitted sets partition the parent's.
pub fn branch(candidate: &BranchCandidate) -> (BranchConstraint, BranchConstraint) {
    match candidate {
        BranchCandidate::Time { ship, port, mean, .. } => {
            let t = libm::floor(mean + 1e-9) as i64;
            (
                BranchConstraint { ship: *ship, port: *port, kind: BranchKind::TimeAtMost(t) },
                BranchConstraint { ship: *ship, port: *port, kind: BranchKind::TimeAtLeast(t + 1) },
            )
        }
        BranchCandidate::BerthType { ship, port, left } => (
            BranchConstraint { ship: *ship, port: *port, kind: BranchKind::TypeIn(left.clone()) },
            BranchConstraint { ship: *ship, port: *port, kind: BranchKind::TypeNotIn(left.clone()) },
        ),
    }
}

/// Per-ship node masks admitting only nodes allowed by every constraint.
pub fn node_filter(graph: &VoyageGraph, constraints: &[BranchConstraint]) -> NodeFilter {
    let mut filter: NodeFilter = vec![None; graph.num_ships()];
    for c in constraints {
        let sg = graph.ship(c.ship);
        let mask = filter[c.ship].get_or_insert_with(|| vec![true; sg.num_nodes()]);
        for layer in sg.layers.iter().filter(|l| l.port == c.port) {
            for (j, &id) in layer.nodes.iter().enumerate() {
                if !c.admits(graph.node(id)) {
                    mask[layer.offset + j] = false;
                }
            }
        }
    }
    filter
}

/// Berth reservations by `(port, berth type, hour)`.
pub type Reservations = BTreeMap<(usize, usize, i64), u32>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Time limit with an incumbent.
    Feasible,
    /// Time limit without an incumbent; only the bound is known.
    TimeLimit,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibilityCertificate {
    /// The ship has no voyage through its route at all.
    Ship(usize),
    /// Every ship has a voyage but they cannot share the berths.
    Clash,
}

/// Seconds spent per phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeShares {
    pub rmp: f64,
    pub pricing: f64,
    pub separation: f64,
    pub branching: f64,
    pub final_mip: f64,
}

impl TimeShares {
    /// Percent of `total` per phase.
    pub fn percent(&self, total: f64) -> TimeShares {
        let f = |x: f64| if total > 0.0 { (100.0 * x / total).clamp(0.0, 100.0) } else { 0.0 };
        TimeShares { rmp: f(self.rmp), pricing: f(self.pricing), separation: f(self.separation), branching: f(self.branching), final_mip: f(self.final_mip) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub lower_bound: f64,
    pub objective: Option<f64>,
    /// `100 (Z − LB) / Z`.
    pub gap_percent: Option<f64>,
    /// Converged root bound after the root's cut rounds.
    pub root_lower_bound: Option<f64>,
    pub wall_seconds: f64,
    pub seconds: TimeShares,
    pub nodes: usize,
    pub cg_iterations: usize,
    pub columns: usize,
    pub cuts: usize,
    pub final_mip_used: bool,
    pub cost_breakdown: Option<CostBreakdown>,
    pub infeasibility: Option<InfeasibilityCertificate>,
}

/// One berthing of the incumbent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRow {
    pub ship: usize,
    pub port: usize,
    pub berth_type: usize,
    pub berth_index: u32,
    pub start: i64,
    pub end: i64,
    /// Sailing speed of the next leg, if any.
    pub speed_to_next_knots: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub rows: Vec<PlanRow>,
}

impl Plan {
    /// Plan rows from one voyage per ship, with physical berths assigned by
    /// first-free greedy over berthing start order.
    pub fn from_columns(instance: &Instance, columns: &[&Column]) -> Plan {
        let mut rows = Vec::new();
        for col in columns {
            let route = &instance.ships[col.ship].route;
            for (r, (call, v)) in route.iter().zip(&col.visits).enumerate() {
                let speed = col.speeds.get(r).map(|&s| instance.speeds_knots.levels()[s as usize]);
                rows.push(PlanRow {
                    ship: col.ship,
                    port: v.port,
                    berth_type: v.berth_type,
                    berth_index: 0,
                    start: v.time,
                    end: v.time + call.handling[v.berth_type],
                    speed_to_next_knots: speed,
                });
            }
        }
        assign_berths(&mut rows);
        rows.sort_by_key(|r| (r.ship, r.start, r.port));
        Plan { rows }
    }

    /// Whether no two rows overlap on one physical berth and every index is
    /// below the berth type's count.
    pub fn is_proper_coloring(&self, instance: &Instance) -> bool {
        for (a, x) in self.rows.iter().enumerate() {
            if x.berth_index >= instance.ports[x.port].berth_types[x.berth_type].count {
                return false;
            }
            for y in &self.rows[a + 1..] {
                let same = (x.port, x.berth_type, x.berth_index) == (y.port, y.berth_type, y.berth_index);
                if same && x.start < y.end && y.start < x.end {
                    return false;
                }
            }
        }
        true
    }
}

fn assign_berths(rows: &mut [PlanRow]) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&i| (rows[i].port, rows[i].berth_type, rows[i].start, rows[i].ship));
    let mut free_at: BTreeMap<(usize, usize), Vec<i64>> = BTreeMap::new();
    for i in order {
        let r = &mut rows[i];
        let ends = free_at.entry((r.port, r.berth_type)).or_default();
        match ends.iter().position(|&e| e <= r.start) {
            Some(b) => {
                ends[b] = r.end;
                r.berth_index = b as u32;
            }
            None => {
                r.berth_index = ends.len() as u32;
                ends.push(r.end);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOutcome {
    pub report: SolveReport,
    /// Incumbent voyage per ship, in ship order.
    pub columns: Vec<Column>,
    pub plan: Option<Plan>,
    /// Every cut added during the search.
    pub cuts: Vec<Cut>,
}

struct OpenNode {
    bound: f64,
    depth: usize,
    seq: usize,
    constraints: Vec<BranchConstraint>,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for OpenNode {}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OpenNode {
    // Max-heap: lowest bound, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

fn prunable(bound: f64, incumbent: Option<f64>) -> bool {
    incumbent.is_some_and(|z| bound >= z - 1e-9 * (1.0 + z.abs()))
}

/// Master reservations vector aligned with the graph's node ids.
fn reserved_vector(graph: &VoyageGraph, reserved: &Reservations) -> Vec<u32> {
    if reserved.is_empty() {
        return Vec::new();
    }
    graph.nodes().iter().map(|n| reserved.get(&(n.port, n.berth_type, n.time)).copied().unwrap_or(0)).collect()
}

fn infeasible_report(certificate: InfeasibilityCertificate) -> SolveOutcome {
    SolveOutcome {
        report: SolveReport {
            status: SolveStatus::Infeasible,
            lower_bound: f64::INFINITY,
            objective: None,
            gap_percent: None,
            root_lower_bound: None,
            wall_seconds: 0.0,
            seconds: TimeShares::default(),
            nodes: 0,
            cg_iterations: 0,
            columns: 0,
            cuts: 0,
            final_mip_used: false,
            cost_breakdown: None,
            infeasibility: Some(certificate),
        },
        columns: Vec::new(),
        plan: None,
        cuts: Vec::new(),
    }
}

pub fn solve<C: Clock + ?Sized>(instance: &Instance, options: &SolveOptions, clock: &C) -> Result<SolveOutcome, SearchError> {
    solve_reserved(instance, options, &Reservations::new(), clock)
}

/// Solves with part of the berth capacity already taken.
pub fn solve_reserved<C: Clock + ?Sized>(
    instance: &Instance,
    options: &SolveOptions,
    reserved: &Reservations,
    clock: &C,
) -> Result<SolveOutcome, SearchError> {
    let start = clock.now();
    let deadline = start + options.time_limit;
    let graph = match VoyageGraph::build(instance) {
        Ok(g) => g,
        Err(GraphError::NoSourceArc { ship } | GraphError::NoVoyage { ship }) => {
            return Ok(infeasible_report(InfeasibilityCertificate::Ship(ship)));
        }
        Err(_) => unreachable!("build reports only missing voyages"),
    };
    let mut master = Master::new(instance, &graph, &reserved_vector(&graph, reserved));
    for c in seed_columns(&graph) {
        master.add_column(instance, &graph, c);
    }

    let mut secs = TimeShares::default();
    let mut cg = CgStats::default();
    let mut heap = BinaryHeap::new();
    let mut seq = 0;
    heap.push(OpenNode { bound: f64::NEG_INFINITY, depth: 0, seq, constraints: Vec::new() });
    let mut incumbent: Option<(f64, Vec<usize>)> = None;
    let mut root_bound = None;
    let mut nodes = 0;
    let mut interrupted = false;

    while let Some(node) = heap.pop() {
        if prunable(node.bound, incumbent.as_ref().map(|i| i.0)) {
            continue;
        }
        if clock.now() >= deadline || nodes >= options.max_nodes {
            heap.push(node);
            interrupted = true;
            break;
        }
        nodes += 1;

        let t0 = clock.now();
        for j in 0..master.num_columns() {
            let ok = node.constraints.iter().all(|c| c.admits_column(&master.columns()[j]));
            master.set_enabled(j, ok);
        }
        let filter = node_filter(&graph, &node.constraints);
        secs.branching += clock.now() - t0;

        let cuts_here = match options.cut_policy {
            CutPolicy::None => false,
            CutPolicy::Root => node.depth == 0,
            CutPolicy::All => true,
        };
        let mut rounds = 0;
        let status = loop {
            let (status, stats) = column_generation(&mut master, instance, &graph, &filter, clock, deadline);
            cg.absorb(&stats);
            if status != CgStatus::Converged || !cuts_here || rounds >= options.max_cut_rounds {
                break status;
            }
            let t1 = clock.now();
            let values = master.values();
            let support: Vec<(&Column, f64)> =
                master.columns().iter().zip(values).filter(|(_, v)| *v > INTEGRALITY_TOL).collect();
            let found = if is_integral(&support) { Vec::new() } else { separate_cuts(instance, &support, master.cut_pool()) };
            let mut added = 0;
            for cut in found {
                if master.add_cut(instance, cut) {
                    added += 1;
                }
            }
            secs.separation += clock.now() - t1;
            if added == 0 {
                break status;
            }
            rounds += 1;
        };
        secs.rmp = cg.rmp_seconds;
        secs.pricing = cg.pricing_seconds;

        match status {
            CgStatus::Converged => {}
            CgStatus::Infeasible => {
                if node.depth == 0 {
                    let mut out = infeasible_report(InfeasibilityCertificate::Clash);
                    out.report.nodes = nodes;
                    out.report.cg_iterations = cg.iterations;
                    out.report.wall_seconds = clock.now() - start;
                    return Ok(out);
                }
                continue;
            }
            CgStatus::TimeLimit => {
                heap.push(node);
                interrupted = true;
                break;
            }
            CgStatus::Numerical => return Err(SearchError::Numerical),
        }

        let bound = master.objective().max(node.bound);
        if node.depth == 0 {
            root_bound = Some(bound);
        }
        if prunable(bound, incumbent.as_ref().map(|i| i.0)) {
            continue;
        }
        let t2 = clock.now();
        let values = master.values();
        let support: Vec<(usize, f64)> = values.iter().copied().enumerate().filter(|&(_, v)| v > INTEGRALITY_TOL).collect();
        let weighted: Vec<(&Column, f64)> = support.iter().map(|&(j, v)| (&master.columns()[j], v)).collect();
        if is_integral(&weighted) {
            let chosen: Vec<usize> = support.iter().filter(|x| x.1 > 0.5).map(|x| x.0).collect();
            let cost: f64 = chosen.iter().map(|&j| master.columns()[j].cost).sum();
            if incumbent.as_ref().is_none_or(|i| cost < i.0) {
                incumbent = Some((cost, chosen));
            }
            secs.branching += clock.now() - t2;
            continue;
        }
        let candidate = select_branch_candidate(&weighted)?;
        let (left, right) = branch(&candidate);
        for c in [left, right] {
            seq += 1;
            let mut constraints = node.constraints.clone();
            constraints.push(c);
            heap.push(OpenNode { bound, depth: node.depth + 1, seq, constraints });
        }
        secs.branching += clock.now() - t2;
    }

    let mut final_mip_used = false;
    if interrupted {
        let open_bound = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
        if !prunable(open_bound, incumbent.as_ref().map(|i| i.0)) && options.final_mip_fraction > 0.0 {
            let t3 = clock.now();
            final_mip_used = true;
            let program = master.restricted_program(instance, &graph);
            let binaries: Vec<usize> = (0..master.num_columns()).collect();
            let mip_options = BnbOptions {
                time_budget: options.final_mip_fraction * options.time_limit,
                cutoff: incumbent.as_ref().map_or(f64::INFINITY, |i| i.0),
                ..BnbOptions::default()
            };
            if let Ok(out) = branch_and_bound_binary(&program, &binaries, mip_options, clock) {
                if matches!(out.status, BnbStatus::Optimal | BnbStatus::TimeLimit) {
                    if let Some(x) = out.solution {
                        let chosen: Vec<usize> = x.iter().enumerate().filter(|(_, v)| **v > 0.5).map(|(j, _)| j).collect();
                        let cost: f64 = chosen.iter().map(|&j| master.columns()[j].cost).sum();
                        if incumbent.as_ref().is_none_or(|i| cost < i.0) {
                            incumbent = Some((cost, chosen));
                        }
                    }
                }
            }
            secs.final_mip += clock.now() - t3;
        }
    }

    let z = incumbent.as_ref().map(|i| i.0);
    let open_bound = heap
        .iter()
        .filter(|n| !prunable(n.bound, z))
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let lower_bound = match z {
        Some(z) => open_bound.min(z),
        None => open_bound,
    };
    let status = match (z, interrupted && open_bound < f64::INFINITY) {
        (Some(_), false) => SolveStatus::Optimal,
        (Some(_), true) => SolveStatus::Feasible,
        (None, true) => SolveStatus::TimeLimit,
        (None, false) => SolveStatus::Infeasible,
    };
    let mut columns: Vec<Column> = incumbent
        .as_ref()
        .map(|i| i.1.iter().map(|&j| master.columns()[j].clone()).collect())
        .unwrap_or_default();
    columns.sort_by_key(|c| c.ship);
    let breakdown = z.map(|_| {
        let mut b = CostBreakdown::default();
        for c in &columns {
            b.add(&voyage_cost(instance, c.ship, &c.visits, &c.speeds));
        }
        b
    });
    let plan = z.map(|_| Plan::from_columns(instance, &columns.iter().collect::<Vec<_>>()));
    let report = SolveReport {
        status,
        lower_bound,
        objective: z,
        gap_percent: z.map(|z| if z.abs() > 0.0 { (100.0 * (z - lower_bound) / z).max(0.0) } else { 0.0 }),
        root_lower_bound: root_bound,
        wall_seconds: clock.now() - start,
        seconds: secs,
        nodes,
        cg_iterations: cg.iterations,
        columns: master.num_columns(),
        cuts: master.cuts().len(),
        final_mip_used,
        cost_breakdown: breakdown,
        infeasibility: (status == SolveStatus::Infeasible).then_some(InfeasibilityCertificate::Clash),
    };
    Ok(SolveOutcome { report, columns, plan, cuts: master.cuts().to_vec() })
}

/// Converged root column-generation bound without cuts or branching.
pub fn root_bound(instance: &Instance) -> Result<Option<f64>, SearchError> {
    let Ok(graph) = VoyageGraph::build(instance) else { return Ok(None) };
    let mut master = Master::new(instance, &graph, &[]);
    for c in seed_columns(&graph) {
        master.add_column(instance, &graph, c);
    }
    let filter = vec![None; graph.num_ships()];
    match column_generation(&mut master, instance, &graph, &filter, &crate::NullClock, f64::INFINITY).0 {
        CgStatus::Converged => Ok(Some(master.objective())),
        CgStatus::Infeasible => Ok(None),
        _ => Err(SearchError::Numerical),
    }
}
