//! Restricted master problem over ship voyages and its pricing loop.
//!
//! Rows: one convexity equality per ship, one capacity row per
//! `(port, berth type, hour)` with right-hand side `β^k` minus any reserved
//! capacity, then one row per cut. Columns are pooled for the lifetime of
//! the master; branching disables them through their upper bound.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::cuts::{cut_row_coefficient, Cut, CutPool};
use crate::graph::{voyage_cost, Node, PricedPath, VoyageGraph};
use crate::lp::{LinearProgram, LpStatus, Sense, Simplex, Tolerances};
use crate::model::Instance;
use crate::Clock;

/// Reduced cost below which a priced column is added.
pub const PRICING_TOL: f64 = 1e-6;
/// Value above which an artificial column counts as used.
const ARTIFICIAL_TOL: f64 = 1e-7;

/// One ship's complete voyage.
#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub ship: usize,
    /// Berthing decision per route call.
    pub visits: Vec<Node>,
    /// Global graph node per route call.
    pub nodes: Vec<usize>,
    /// Speed level per leg.
    pub speeds: Vec<u8>,
    pub cost: f64,
}

impl Column {
    pub fn from_path(graph: &VoyageGraph, ship: usize, path: &PricedPath) -> Column {
        Column {
            ship,
            visits: path.nodes.iter().map(|&v| graph.node(v)).collect(),
            nodes: path.nodes.clone(),
            speeds: path.speeds.clone(),
            cost: path.cost,
        }
    }

    /// Capacity rows covered: every hour of every berthing period.
    pub fn footprint(&self, instance: &Instance, graph: &VoyageGraph) -> Vec<usize> {
        let route = &instance.ships[self.ship].route;
        let mut out = Vec::new();
        for (call, (&id, v)) in route.iter().zip(self.nodes.iter().zip(&self.visits)) {
            let h = call.handling[v.berth_type] as usize;
            debug_assert_eq!(graph.node(id), *v);
            out.extend(id..id + h);
        }
        out
    }

    /// Berthing start at `port`, if the route calls there.
    pub fn visit_at(&self, port: usize) -> Option<Node> {
        self.visits.iter().copied().find(|v| v.port == port)
    }
}

/// Duals of the master rows under the crate-wide sign convention.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPrices {
    /// Convexity row per ship.
    pub alpha: Vec<f64>,
    /// Capacity row per graph node; `≤ 0`.
    pub mu: Vec<f64>,
    /// Per cut in pool order; `≤ 0`.
    pub cut: Vec<f64>,
}

/// Reduced cost of `column` from the row duals, computed visit by visit.
pub fn reduced_cost(instance: &Instance, column: &Column, duals: &DualPrices, cuts: &[Cut]) -> f64 {
    let route = &instance.ships[column.ship].route;
    let mut rc = column.cost - duals.alpha[column.ship];
    for (call, (&id, v)) in route.iter().zip(column.nodes.iter().zip(&column.visits)) {
        let h = call.handling[v.berth_type] as usize;
        rc -= duals.mu[id..id + h].iter().sum::<f64>();
    }
    for (c, cut) in cuts.iter().enumerate() {
        if cut_row_coefficient(instance, cut, column) == 1 {
            rc -= duals.cut[c];
        }
    }
    rc
}

/// Pricing weight of every node in ship `i`'s layers: the negated sum of
/// capacity duals over the berthing period plus the duals of cuts whose
/// range holds the node.
pub fn node_weights(instance: &Instance, graph: &VoyageGraph, ship: usize, duals: &DualPrices, cuts: &[Cut]) -> Vec<f64> {
    let mut prefix = Vec::with_capacity(duals.mu.len() + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &m in &duals.mu {
        acc += m;
        prefix.push(acc);
    }
    let sg = graph.ship(ship);
    let route = &instance.ships[ship].route;
    let mut w = vec![0.0; sg.num_nodes()];
    for (layer, call) in sg.layers.iter().zip(route) {
        for (j, &id) in layer.nodes.iter().enumerate() {
            let h = call.handling[graph.node(id).berth_type] as usize;
            w[layer.offset + j] = -(prefix[id + h] - prefix[id]);
        }
    }
    for (c, cut) in cuts.iter().enumerate() {
        let d = duals.cut[c];
        if d == 0.0 {
            continue;
        }
        let Some((lo, hi)) = cut.interval(instance, ship) else { continue };
        let Some(r) = route.iter().position(|call| call.port == cut.port) else { continue };
        let layer = &sg.layers[r];
        for (j, &id) in layer.nodes.iter().enumerate() {
            let n = graph.node(id);
            if n.berth_type == cut.berth_type && lo <= n.time && n.time <= hi {
                w[layer.offset + j] -= d;
            }
        }
    }
    w
}

/// Zero-dual shortest voyage of every ship.
pub fn seed_columns(graph: &VoyageGraph) -> Vec<Column> {
    (0..graph.num_ships())
        .map(|i| {
            let zeros = vec![0.0; graph.ship(i).num_nodes()];
            let path = graph.shortest_path(i, &zeros, None).expect("built graphs have a voyage per ship");
            Column::from_path(graph, i, &path)
        })
        .collect()
}

/// Most expensive voyage of ship `i`.
pub fn worst_voyage_cost(graph: &VoyageGraph, i: usize) -> f64 {
    let sg = graph.ship(i);
    let mut best: Vec<f64> = sg.layers[0].source_cost.clone();
    for layer in &sg.layers[1..] {
        best = layer
            .preds
            .iter()
            .map(|arcs| arcs.iter().map(|a| best[a.from as usize] + a.cost).fold(f64::NEG_INFINITY, f64::max))
            .collect();
    }
    best.into_iter().fold(0.0, f64::max)
}

#[derive(Clone, Debug)]
pub struct Master {
    lp: Simplex,
    ships: usize,
    nodes: usize,
    columns: Vec<Column>,
    col_var: Vec<usize>,
    enabled: Vec<bool>,
    index: BTreeMap<(usize, Vec<usize>, Vec<u8>), usize>,
    artificial: Vec<usize>,
    big_m: f64,
    /// Minimizing artificial usage with zero real costs.
    phase_one: bool,
    cuts: CutPool,
    cut_rows: Vec<usize>,
    capacity: Vec<f64>,
}

impl Master {
    /// Empty master with artificial columns. `reserved[v]` berths of node
    /// `v` are taken out of capacity (empty slice for none).
    pub fn new(instance: &Instance, graph: &VoyageGraph, reserved: &[u32]) -> Master {
        let ships = instance.ships.len();
        let nodes = graph.num_nodes();
        let mut lp = Simplex::new(Tolerances::default());
        for _ in 0..ships {
            lp.add_row(&[], Sense::Eq, 1.0);
        }
        let mut capacity = Vec::with_capacity(nodes);
        for (v, n) in graph.nodes().iter().enumerate() {
            let beta = instance.ports[n.port].berth_types[n.berth_type].count as f64;
            let cap = beta - reserved.get(v).copied().unwrap_or(0) as f64;
            capacity.push(cap);
            lp.add_row(&[], Sense::Le, cap);
        }
        let worst: f64 = (0..ships).map(|i| worst_voyage_cost(graph, i)).sum();
        let big_m = 10.0 * worst.max(1.0);
        let artificial = (0..ships).map(|i| lp.add_column(big_m, 0.0, f64::INFINITY, &[(i, 1.0)])).collect();
        Master {
            lp,
            ships,
            nodes,
            columns: Vec::new(),
            col_var: Vec::new(),
            enabled: Vec::new(),
            index: BTreeMap::new(),
            artificial,
            big_m,
            phase_one: false,
            cuts: CutPool::new(),
            cut_rows: Vec::new(),
            capacity,
        }
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn cuts(&self) -> &[Cut] {
        self.cuts.cuts()
    }

    pub fn cut_pool(&self) -> &CutPool {
        &self.cuts
    }

    pub fn big_m(&self) -> f64 {
        self.big_m
    }

    /// Pool index of an identical column, if any.
    pub fn find(&self, column: &Column) -> Option<usize> {
        self.index.get(&(column.ship, column.nodes.clone(), column.speeds.clone())).copied()
    }

    /// Adds a column unless an identical one is pooled; returns its index
    /// and whether it was new.
    pub fn add_column(&mut self, instance: &Instance, graph: &VoyageGraph, column: Column) -> (usize, bool) {
        if let Some(j) = self.find(&column) {
            return (j, false);
        }
        let mut entries = vec![(column.ship, 1.0)];
        entries.extend(column.footprint(instance, graph).into_iter().map(|v| (self.ships + v, 1.0)));
        for (c, cut) in self.cuts.cuts().iter().enumerate() {
            if cut_row_coefficient(instance, cut, &column) == 1 {
                entries.push((self.cut_rows[c], 1.0));
            }
        }
        let cost = if self.phase_one { 0.0 } else { column.cost };
        let var = self.lp.add_column(cost, 0.0, f64::INFINITY, &entries);
        let j = self.columns.len();
        self.index.insert((column.ship, column.nodes.clone(), column.speeds.clone()), j);
        self.columns.push(column);
        self.col_var.push(var);
        self.enabled.push(true);
        (j, true)
    }

    /// Appends a cut row; returns false for a duplicate.
    pub fn add_cut(&mut self, instance: &Instance, cut: Cut) -> bool {
        if !self.cuts.insert(cut) {
            return false;
        }
        let entries: Vec<(usize, f64)> = self
            .columns
            .iter()
            .zip(&self.col_var)
            .filter(|(c, _)| cut_row_coefficient(instance, &cut, c) == 1)
            .map(|(_, &v)| (v, 1.0))
            .collect();
        let row = self.lp.add_row(&entries, Sense::Le, cut.rhs(instance));
        self.cut_rows.push(row);
        true
    }

    pub fn set_enabled(&mut self, j: usize, on: bool) {
        if self.enabled[j] != on {
            self.enabled[j] = on;
            self.lp.set_bounds(self.col_var[j], 0.0, if on { f64::INFINITY } else { 0.0 });
        }
    }

    pub fn is_enabled(&self, j: usize) -> bool {
        self.enabled[j]
    }

    pub fn solve(&mut self) -> LpStatus {
        self.lp.solve()
    }

    pub fn objective(&self) -> f64 {
        self.lp.objective()
    }

    pub fn lp_iterations(&self) -> usize {
        self.lp.iterations()
    }

    pub fn duals(&self) -> DualPrices {
        DualPrices {
            alpha: (0..self.ships).map(|i| self.lp.dual(i)).collect(),
            mu: (0..self.nodes).map(|v| self.lp.dual(self.ships + v)).collect(),
            cut: self.cut_rows.iter().map(|&r| self.lp.dual(r)).collect(),
        }
    }

    /// λ value per pooled column.
    pub fn values(&self) -> Vec<f64> {
        self.col_var.iter().map(|&v| self.lp.value(v)).collect()
    }

    /// Positive-valued columns with their λ.
    pub fn support(&self) -> Vec<(usize, f64)> {
        self.values().into_iter().enumerate().filter(|&(_, v)| v > ARTIFICIAL_TOL).collect()
    }

    pub fn artificial_in_use(&self) -> bool {
        self.artificial.iter().any(|&a| self.lp.value(a) > ARTIFICIAL_TOL)
    }

    /// Switches between the feasibility objective (artificials cost 1, real
    /// columns 0) and the true objective.
    fn set_phase_one(&mut self, on: bool) {
        if self.phase_one == on {
            return;
        }
        self.phase_one = on;
        for (c, &v) in self.columns.iter().zip(&self.col_var) {
            self.lp.set_cost(v, if on { 0.0 } else { c.cost });
        }
        for &a in &self.artificial {
            self.lp.set_cost(a, if on { 1.0 } else { self.big_m });
        }
    }

    fn set_artificials_allowed(&mut self, on: bool) {
        for &a in &self.artificial {
            self.lp.set_bounds(a, 0.0, if on { f64::INFINITY } else { 0.0 });
        }
    }

    /// Binary program over every pooled column: convexity and capacity rows
    /// only. Variable `j` is pooled column `j`.
    pub fn restricted_program(&self, instance: &Instance, graph: &VoyageGraph) -> LinearProgram {
        let mut lp = LinearProgram::new();
        let mut conv: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.ships];
        let mut cap: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.nodes];
        for (j, col) in self.columns.iter().enumerate() {
            lp.add_variable(col.cost, 0.0, 1.0);
            conv[col.ship].push((j, 1.0));
            for v in col.footprint(instance, graph) {
                cap[v].push((j, 1.0));
            }
        }
        for row in conv {
            lp.add_row(row, Sense::Eq, 1.0);
        }
        for (v, row) in cap.into_iter().enumerate() {
            if row.len() as f64 > self.capacity[v] {
                lp.add_row(row, Sense::Le, self.capacity[v]);
            }
        }
        lp
    }
}

/// Per-ship allowed-node masks over the ship-local flat node order;
/// `None` allows everything.
pub type NodeFilter = Vec<Option<Vec<bool>>>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PricingRound {
    pub added: usize,
    /// A ship without any allowed voyage.
    pub infeasible_ship: Option<usize>,
    pub min_reduced_cost: f64,
}

/// Prices every ship once against the current duals and adds each ship's
/// best column if its reduced cost is below `-PRICING_TOL`.
pub fn price_and_add(master: &mut Master, instance: &Instance, graph: &VoyageGraph, filter: &NodeFilter) -> PricingRound {
    let duals = master.duals();
    let cuts: Vec<Cut> = master.cuts().to_vec();
    let scale = if master.phase_one { 0.0 } else { 1.0 };
    let mut round = PricingRound { min_reduced_cost: f64::INFINITY, ..Default::default() };
    for i in 0..instance.ships.len() {
        let w = node_weights(instance, graph, i, &duals, &cuts);
        let allowed = filter.get(i).and_then(|f| f.as_deref());
        let Some(path) = graph.shortest_path_scaled(i, &w, allowed, scale) else {
            round.infeasible_ship = Some(i);
            return round;
        };
        let rc = path.weight - duals.alpha[i];
        round.min_reduced_cost = round.min_reduced_cost.min(rc);
        if rc < -PRICING_TOL {
            let (_, new) = master.add_column(instance, graph, Column::from_path(graph, i, &path));
            if new {
                round.added += 1;
            }
        }
    }
    round
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    /// Pricing found no improving column; the objective is a valid bound.
    Converged,
    /// No feasible LP solution without artificial columns.
    Infeasible,
    /// The clock ran out before convergence.
    TimeLimit,
    /// The LP engine failed to reach optimality.
    Numerical,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub columns_added: usize,
    pub rmp_seconds: f64,
    pub pricing_seconds: f64,
}

impl CgStats {
    pub fn absorb(&mut self, other: &CgStats) {
        self.iterations += other.iterations;
        self.columns_added += other.columns_added;
        self.rmp_seconds += other.rmp_seconds;
        self.pricing_seconds += other.pricing_seconds;
    }
}

/// Alternates master solves and pricing rounds until no ship prices out.
/// If the converged master still needs artificial columns, a feasibility
/// pass decides whether real columns can replace them; if so the
/// artificials are switched off and optimization resumes.
pub fn column_generation<C: Clock + ?Sized>(
    master: &mut Master,
    instance: &Instance,
    graph: &VoyageGraph,
    filter: &NodeFilter,
    clock: &C,
    deadline: f64,
) -> (CgStatus, CgStats) {
    let mut stats = CgStats::default();
    master.set_artificials_allowed(true);
    let status = price_loop(master, instance, graph, filter, clock, deadline, &mut stats);
    if status != CgStatus::Converged || !master.artificial_in_use() {
        return (status, stats);
    }
    master.set_phase_one(true);
    let status = price_loop(master, instance, graph, filter, clock, deadline, &mut stats);
    let feasible = status == CgStatus::Converged && !master.artificial_in_use();
    master.set_phase_one(false);
    if status != CgStatus::Converged {
        return (status, stats);
    }
    if !feasible {
        return (CgStatus::Infeasible, stats);
    }
    master.set_artificials_allowed(false);
    let status = price_loop(master, instance, graph, filter, clock, deadline, &mut stats);
    (status, stats)
}

fn price_loop<C: Clock + ?Sized>(
    master: &mut Master,
    instance: &Instance,
    graph: &VoyageGraph,
    filter: &NodeFilter,
    clock: &C,
    deadline: f64,
    stats: &mut CgStats,
) -> CgStatus {
    loop {
        let t0 = clock.now();
        let status = master.solve();
        let t1 = clock.now();
        stats.rmp_seconds += t1 - t0;
        if status == LpStatus::Infeasible {
            return CgStatus::Infeasible;
        }
        if status != LpStatus::Optimal {
            return CgStatus::Numerical;
        }
        let round = price_and_add(master, instance, graph, filter);
        let t2 = clock.now();
        stats.pricing_seconds += t2 - t1;
        stats.iterations += 1;
        stats.columns_added += round.added;
        if round.infeasible_ship.is_some() {
            return CgStatus::Infeasible;
        }
        if round.added == 0 {
            return CgStatus::Converged;
        }
        if t2 >= deadline {
            return CgStatus::TimeLimit;
        }
    }
}

/// Audits a column's stored cost against an independent recomputation.
pub fn column_cost_matches(instance: &Instance, column: &Column) -> bool {
    let c = voyage_cost(instance, column.ship, &column.visits, &column.speeds).total();
    (c - column.cost).abs() <= 1e-9 * (1.0 + c.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::generate_micro;
    use crate::NullClock;

    #[test]
    fn seeds_are_shortest_voyages_with_audited_costs() {
        for seed in 0..20 {
            let inst = generate_micro(seed);
            let g = VoyageGraph::build(&inst).unwrap();
            for col in seed_columns(&g) {
                assert!(column_cost_matches(&inst, &col));
                let best = g.all_paths(col.ship).iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
                assert!((best - col.cost).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn converged_master_prices_nothing() {
        let inst = generate_micro(2);
        let g = VoyageGraph::build(&inst).unwrap();
        let mut m = Master::new(&inst, &g, &[]);
        for c in seed_columns(&g) {
            m.add_column(&inst, &g, c);
        }
        let filter = vec![None; inst.ships.len()];
        let (status, _) = column_generation(&mut m, &inst, &g, &filter, &NullClock, f64::INFINITY);
        assert_eq!(status, CgStatus::Converged);
        let again = price_and_add(&mut m, &inst, &g, &filter);
        assert_eq!(again.added, 0);
    }
}
