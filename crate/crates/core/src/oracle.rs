//! Ground truth for tiny instances.
//!
//! [`enumerate_optimum`] lists every voyage of every ship directly from the
//! instance data, with its own cost arithmetic, and searches the joint
//! product depth-first under berth capacity. [`network_flow_lp_bound`]
//! solves the arc-flow relaxation over the voyage graph.

use alloc::vec;
use alloc::vec::Vec;

use crate::colgen::{column_generation, seed_columns, CgStatus, Master};
use crate::graph::{Node, VoyageGraph};
use crate::lp::{LinearProgram, LpStatus, Sense, Simplex, Tolerances};
use crate::model::Instance;
use crate::Clock;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("instance has {ships} ships, above the cap of {cap}")]
    TooManyShips { ships: usize, cap: usize },
    #[error("search exceeded {cap} steps")]
    WorkCap { cap: u64 },
    #[error("flow LP would have {vars} variables, above the cap of {cap}")]
    LpTooLarge { vars: usize, cap: usize },
    #[error("graph construction failed: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("LP solve ended with status {0:?}")]
    Lp(LpStatus),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleCaps {
    pub max_ships: usize,
    /// Depth-first steps before refusing.
    pub max_work: u64,
    pub max_lp_vars: usize,
}

impl Default for OracleCaps {
    fn default() -> Self {
        OracleCaps { max_ships: 4, max_work: 10_000_000, max_lp_vars: 200_000 }
    }
}

/// One ship's voyage with the cheapest speed on every leg.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub ship: usize,
    pub visits: Vec<Node>,
    pub speeds: Vec<u8>,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnumerationResult {
    /// `None` when no joint assignment fits the berths.
    pub cost: Option<f64>,
    pub assignment: Vec<Schedule>,
    /// Complete feasible joint assignments reached.
    pub examined: u64,
}

fn leg(instance: &Instance, ship: usize, from: usize, to: usize, ready: i64, start: i64) -> Option<(u8, f64)> {
    let s = &instance.ships[ship];
    let w = instance.costs;
    let nm = instance.ports[from].distances.iter().find(|d| d.to == to)?.nm;
    let mut best: Option<(u8, f64)> = None;
    for (i, &v) in instance.speeds_knots.levels().iter().enumerate() {
        let hours = libm::ceil(nm / v - 1e-9) as i64;
        if ready + hours > start {
            continue;
        }
        let ratio = v / s.design_speed;
        let tons = s.design_consumption * ratio * ratio * ratio * (nm / v);
        let c = w.fuel * tons + w.idle * (start - ready - hours) as f64;
        if best.is_none_or(|b| c < b.1) {
            best = Some((i as u8, c));
        }
    }
    best
}

/// Every voyage of `ship`, in route order of berthing decisions.
pub fn ship_schedules(instance: &Instance, ship: usize) -> Vec<Schedule> {
    let route = &instance.ships[ship].route;
    let mut out = Vec::new();
    let mut visits = Vec::new();
    let mut speeds = Vec::new();
    extend(instance, ship, 0, 0.0, &mut visits, &mut speeds, &mut out);
    debug_assert!(route.is_empty() || out.iter().all(|s| s.visits.len() == route.len()));
    out
}

fn extend(instance: &Instance, ship: usize, r: usize, cost: f64, visits: &mut Vec<Node>, speeds: &mut Vec<u8>, out: &mut Vec<Schedule>) {
    let route = &instance.ships[ship].route;
    if r == route.len() {
        out.push(Schedule { ship, visits: visits.clone(), speeds: speeds.clone(), cost });
        return;
    }
    let call = &route[r];
    let w = instance.costs;
    for (k, bt) in instance.ports[call.port].berth_types.iter().enumerate() {
        let h = call.handling[k];
        for t in call.start.max(bt.open)..=bt.close - h {
            let mut c = cost + w.handling * h as f64 + w.delay * (t + h - call.eft).max(0) as f64;
            if r > 0 {
                let prev = visits[r - 1];
                let ready = prev.time + route[r - 1].handling[prev.berth_type];
                let Some((s, lc)) = leg(instance, ship, prev.port, call.port, ready, t) else { continue };
                c += lc;
                speeds.push(s);
            }
            visits.push(Node { port: call.port, berth_type: k, time: t });
            extend(instance, ship, r + 1, c, visits, speeds, out);
            visits.pop();
            if r > 0 {
                speeds.pop();
            }
        }
    }
}

/// Occupancy counter over every `(port, berth type, hour)` of the windows.
struct Occupancy<'a> {
    instance: &'a Instance,
    base: Vec<Vec<usize>>,
    used: Vec<u32>,
}

impl<'a> Occupancy<'a> {
    fn new(instance: &'a Instance) -> Self {
        let mut base = Vec::new();
        let mut n = 0;
        for port in &instance.ports {
            let mut b = Vec::new();
            for bt in &port.berth_types {
                b.push(n);
                n += (bt.close - bt.open).max(0) as usize;
            }
            base.push(b);
        }
        Occupancy { instance, base, used: vec![0; n] }
    }

    fn slots(&self, s: &Schedule) -> impl Iterator<Item = (usize, u32)> + '_ {
        let route = &self.instance.ships[s.ship].route;
        let mut v = Vec::new();
        for (call, n) in route.iter().zip(&s.visits) {
            let bt = self.instance.ports[n.port].berth_types[n.berth_type];
            let b = self.base[n.port][n.berth_type];
            for t in n.time..n.time + call.handling[n.berth_type] {
                v.push((b + (t - bt.open) as usize, bt.count));
            }
        }
        v.into_iter()
    }

    fn fits(&self, s: &Schedule) -> bool {
        self.slots(s).all(|(i, cap)| self.used[i] < cap)
    }

    fn add(&mut self, s: &Schedule, delta: i32) {
        let idx: Vec<usize> = self.slots(s).map(|x| x.0).collect();
        for i in idx {
            self.used[i] = (self.used[i] as i32 + delta) as u32;
        }
    }
}

struct Search<'a, F> {
    options: &'a [Vec<(f64, Schedule)>],
    occ: Occupancy<'a>,
    /// Suffix sums of per-ship minimum weights; `None` disables pruning.
    rest: Option<Vec<f64>>,
    best: Option<f64>,
    best_pick: Vec<usize>,
    pick: Vec<usize>,
    work: u64,
    cap: u64,
    examined: u64,
    /// Stop at the first complete assignment with weight at most this.
    target: Option<f64>,
    found: bool,
    visit: F,
}

impl<F: FnMut(&[&Schedule])> Search<'_, F> {
    fn run(&mut self, i: usize, acc: f64) -> Result<(), OracleError> {
        let options = self.options;
        if i == options.len() {
            self.examined += 1;
            let chosen: Vec<&Schedule> = self.pick.iter().enumerate().map(|(s, &j)| &options[s][j].1).collect();
            (self.visit)(&chosen);
            if self.best.is_none_or(|b| acc < b) {
                self.best = Some(acc);
                self.best_pick = self.pick.clone();
            }
            self.found = self.target.is_some_and(|t| acc <= t);
            return Ok(());
        }
        for j in 0..options[i].len() {
            self.work += 1;
            if self.work > self.cap {
                return Err(OracleError::WorkCap { cap: self.cap });
            }
            let w = options[i][j].0;
            if let Some(rest) = &self.rest {
                let bound = acc + w + rest[i + 1];
                if self.target.is_some_and(|t| bound > t) || self.best.is_some_and(|b| bound >= b) {
                    break;
                }
            }
            let s = &options[i][j].1;
            if !self.occ.fits(s) {
                continue;
            }
            self.occ.add(s, 1);
            self.pick.push(j);
            let r = self.run(i + 1, acc + w);
            self.pick.pop();
            self.occ.add(s, -1);
            r?;
            if self.found {
                return Ok(());
            }
        }
        Ok(())
    }
}

/// Minimizes `Σ weight(schedule)` over capacity-feasible joint assignments.
/// With `prune` unset every feasible assignment is visited.
pub fn optimize_joint<W, F>(instance: &Instance, caps: &OracleCaps, weight: W, prune: bool, visit: F) -> Result<EnumerationResult, OracleError>
where
    W: Fn(&Schedule) -> f64,
    F: FnMut(&[&Schedule]),
{
    joint_search(instance, caps, weight, prune, None, visit)
}

/// First capacity-feasible joint assignment with `Σ weight ≤ target`, if any.
pub fn find_joint<W>(instance: &Instance, caps: &OracleCaps, weight: W, target: f64) -> Result<Option<Vec<Schedule>>, OracleError>
where
    W: Fn(&Schedule) -> f64,
{
    let r = joint_search(instance, caps, weight, true, Some(target), |_| {})?;
    Ok(r.cost.filter(|&c| c <= target).map(|_| r.assignment))
}

/// Any capacity-feasible joint assignment.
pub fn first_feasible(instance: &Instance, caps: &OracleCaps) -> Result<Option<Vec<Schedule>>, OracleError> {
    find_joint(instance, caps, |_| 0.0, 0.0)
}

fn joint_search<W, F>(instance: &Instance, caps: &OracleCaps, weight: W, prune: bool, target: Option<f64>, visit: F) -> Result<EnumerationResult, OracleError>
where
    W: Fn(&Schedule) -> f64,
    F: FnMut(&[&Schedule]),
{
    let n = instance.ships.len();
    if n > caps.max_ships {
        return Err(OracleError::TooManyShips { ships: n, cap: caps.max_ships });
    }
    let options: Vec<Vec<(f64, Schedule)>> = (0..n)
        .map(|i| {
            let mut v: Vec<(f64, Schedule)> = ship_schedules(instance, i).into_iter().map(|s| (weight(&s), s)).collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            v
        })
        .collect();
    if options.iter().any(|o| o.is_empty()) {
        return Ok(EnumerationResult { cost: None, assignment: Vec::new(), examined: 0 });
    }
    let rest = prune.then(|| {
        let mut r = vec![0.0; n + 1];
        for i in (0..n).rev() {
            r[i] = r[i + 1] + options[i][0].0;
        }
        r
    });
    let mut search = Search {
        options: &options,
        occ: Occupancy::new(instance),
        rest,
        best: None,
        best_pick: Vec::new(),
        pick: Vec::new(),
        work: 0,
        cap: caps.max_work,
        examined: 0,
        target,
        found: false,
        visit,
    };
    search.run(0, 0.0)?;
    let assignment = search.best_pick.iter().enumerate().map(|(i, &j)| options[i][j].1.clone()).collect();
    Ok(EnumerationResult { cost: search.best, assignment, examined: search.examined })
}

/// Exact minimum total cost.
pub fn enumerate_optimum(instance: &Instance, caps: &OracleCaps) -> Result<EnumerationResult, OracleError> {
    optimize_joint(instance, caps, |s| s.cost, true, |_| {})
}

/// Largest number of ships that can simultaneously run a voyage satisfying
/// `pick`, capacity-feasible among themselves, with the other ships absent.
/// An upper bound on `Σ_i [voyage_i satisfies pick]` over full assignments.
pub fn max_simultaneous<P>(instance: &Instance, caps: &OracleCaps, pick: P) -> Result<usize, OracleError>
where
    P: Fn(&Schedule) -> bool,
{
    let n = instance.ships.len();
    if n > caps.max_ships {
        return Err(OracleError::TooManyShips { ships: n, cap: caps.max_ships });
    }
    let options: Vec<Vec<Schedule>> = (0..n).map(|i| ship_schedules(instance, i).into_iter().filter(|s| pick(s)).collect()).collect();
    let mut occ = Occupancy::new(instance);
    let mut work = 0u64;
    fn go(i: usize, count: usize, best: &mut usize, options: &[Vec<Schedule>], occ: &mut Occupancy, work: &mut u64, cap: u64) -> Result<(), OracleError> {
        if count + (options.len() - i) <= *best {
            return Ok(());
        }
        if i == options.len() {
            *best = count;
            return Ok(());
        }
        for s in &options[i] {
            *work += 1;
            if *work > cap {
                return Err(OracleError::WorkCap { cap });
            }
            if occ.fits(s) {
                occ.add(s, 1);
                let r = go(i + 1, count + 1, best, options, occ, work, cap);
                occ.add(s, -1);
                r?;
                if count + (options.len() - i) <= *best {
                    return Ok(());
                }
            }
        }
        go(i + 1, count, best, options, occ, work, cap)
    }
    let mut best = 0;
    go(0, 0, &mut best, &options, &mut occ, &mut work, caps.max_work)?;
    Ok(best)
}

/// Arc-flow relaxation over the voyage graph: one unit of flow per ship
/// from source to sink, berth capacity on every `(port, type, hour)`.
pub fn network_flow_program(instance: &Instance, graph: &VoyageGraph, caps: &OracleCaps) -> Result<LinearProgram, OracleError> {
    let vars: usize = (0..graph.num_ships())
        .map(|i| {
            let sg = graph.ship(i);
            sg.num_arcs() + sg.layers[0].nodes.len() + sg.layers.last().map_or(0, |l| l.nodes.len())
        })
        .sum();
    if vars > caps.max_lp_vars {
        return Err(OracleError::LpTooLarge { vars, cap: caps.max_lp_vars });
    }
    let mut lp = LinearProgram::new();
    let mut capacity: Vec<Vec<(usize, f64)>> = vec![Vec::new(); graph.num_nodes()];
    for i in 0..graph.num_ships() {
        let sg = graph.ship(i);
        let route = &instance.ships[i].route;
        // Flow into and out of every local node.
        let mut inflow: Vec<Vec<usize>> = vec![Vec::new(); sg.num_nodes()];
        let mut outflow: Vec<Vec<usize>> = vec![Vec::new(); sg.num_nodes()];
        let mut sources = Vec::new();
        for (j, &c) in sg.layers[0].source_cost.iter().enumerate() {
            let x = lp.add_variable(c, 0.0, 1.0);
            inflow[sg.layers[0].offset + j].push(x);
            sources.push((x, 1.0));
        }
        for r in 1..sg.layers.len() {
            let (prev, layer) = (&sg.layers[r - 1], &sg.layers[r]);
            for (j, arcs) in layer.preds.iter().enumerate() {
                for a in arcs {
                    let x = lp.add_variable(a.cost, 0.0, 1.0);
                    inflow[layer.offset + j].push(x);
                    outflow[prev.offset + a.from as usize].push(x);
                }
            }
        }
        let last = sg.layers.last().expect("nonempty route");
        for j in 0..last.nodes.len() {
            let x = lp.add_variable(0.0, 0.0, 1.0);
            outflow[last.offset + j].push(x);
        }
        lp.add_row(sources, Sense::Eq, 1.0);
        for (inn, out) in inflow.iter().zip(&outflow) {
            let mut row: Vec<(usize, f64)> = inn.iter().map(|&x| (x, 1.0)).collect();
            row.extend(out.iter().map(|&x| (x, -1.0)));
            lp.add_row(row, Sense::Eq, 0.0);
        }
        for (layer, call) in sg.layers.iter().zip(route) {
            for (j, &id) in layer.nodes.iter().enumerate() {
                let h = call.handling[graph.node(id).berth_type] as usize;
                for v in id..id + h {
                    capacity[v].extend(inflow[layer.offset + j].iter().map(|&x| (x, 1.0)));
                }
            }
        }
    }
    for (v, row) in capacity.into_iter().enumerate() {
        if !row.is_empty() {
            let n = graph.node(v);
            lp.add_row(row, Sense::Le, instance.ports[n.port].berth_types[n.berth_type].count as f64);
        }
    }
    Ok(lp)
}

/// Optimal value of the arc-flow relaxation; `None` if it is infeasible.
pub fn network_flow_lp_bound(instance: &Instance, caps: &OracleCaps) -> Result<Option<f64>, OracleError> {
    let graph = VoyageGraph::build(instance)?;
    let program = network_flow_program(instance, &graph, caps)?;
    let mut lp = Simplex::from_program(&program, Tolerances::default());
    match lp.solve() {
        LpStatus::Optimal => Ok(Some(lp.objective())),
        LpStatus::Infeasible => Ok(None),
        s => Err(OracleError::Lp(s)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootTiming {
    pub colgen_seconds: f64,
    pub colgen_bound: f64,
    pub flow_seconds: f64,
    pub flow_bound: f64,
}

/// Wall time of the converged root column generation against the arc-flow
/// LP on the same instance, both with the crate's simplex. Graph
/// construction is shared and excluded.
pub fn time_root_bounds<C: Clock + ?Sized>(instance: &Instance, caps: &OracleCaps, clock: &C) -> Result<RootTiming, OracleError> {
    let graph = VoyageGraph::build(instance)?;
    let t0 = clock.now();
    let mut master = Master::new(instance, &graph, &[]);
    for c in seed_columns(&graph) {
        master.add_column(instance, &graph, c);
    }
    let filter = vec![None; graph.num_ships()];
    let (status, _) = column_generation(&mut master, instance, &graph, &filter, clock, f64::INFINITY);
    if status != CgStatus::Converged {
        return Err(OracleError::Lp(LpStatus::Infeasible));
    }
    let colgen_bound = master.objective();
    let t1 = clock.now();
    let program = network_flow_program(instance, &graph, caps)?;
    let mut lp = Simplex::from_program(&program, Tolerances::default());
    let status = lp.solve();
    let t2 = clock.now();
    if status != LpStatus::Optimal {
        return Err(OracleError::Lp(status));
    }
    Ok(RootTiming { colgen_seconds: t1 - t0, colgen_bound, flow_seconds: t2 - t1, flow_bound: lp.objective() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::voyage_cost;
    use crate::model::generate_micro;

    #[test]
    fn schedule_costs_agree_with_the_cost_definition() {
        for seed in 0..10 {
            let inst = generate_micro(seed);
            for i in 0..inst.ships.len() {
                for s in ship_schedules(&inst, i) {
                    let c = voyage_cost(&inst, i, &s.visits, &s.speeds).total();
                    assert!((c - s.cost).abs() < 1e-6, "{c} vs {}", s.cost);
                }
            }
        }
    }

    #[test]
    fn single_ship_optimum_is_its_cheapest_voyage() {
        let mut inst = generate_micro(4);
        inst.ships.truncate(1);
        let r = enumerate_optimum(&inst, &OracleCaps::default()).unwrap();
        let cheapest = ship_schedules(&inst, 0).iter().map(|s| s.cost).fold(f64::INFINITY, f64::min);
        assert_eq!(r.cost, Some(cheapest));
        let lp = network_flow_lp_bound(&inst, &OracleCaps::default()).unwrap().unwrap();
        assert!((lp - cheapest).abs() < 1e-6 * (1.0 + cheapest));
    }

    #[test]
    fn ship_cap_refuses() {
        let inst = generate_micro(1);
        let caps = OracleCaps { max_ships: 1, ..OracleCaps::default() };
        if inst.ships.len() > 1 {
            assert!(matches!(enumerate_optimum(&inst, &caps), Err(OracleError::TooManyShips { .. })));
        }
    }
}
