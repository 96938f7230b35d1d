//! Time-expanded voyage graph.
//!
//! Interior nodes are `(port, berth type, hour)` triples for every hour of
//! the berth type's operating window; they are shared by all ships. Each
//! ship owns a layered arc set: one layer per route call, source arcs into
//! the first layer, travel arcs between consecutive layers and free sink
//! arcs out of the last one. A node in a ship's layer means "berthing
//! starts at this hour at this berth type".

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{fuel_per_distance, sailing_hours, Instance, Ship};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("ship {ship} has no feasible berthing slot at its first port")]
    NoSourceArc { ship: usize },
    #[error("ship {ship} has no feasible voyage through its route")]
    NoVoyage { ship: usize },
    #[error("time {time} is outside the window of berth type {berth_type} at port {port}")]
    OutsideWindow { port: usize, berth_type: usize, time: i64 },
    #[error("ship {ship} does not call at port {port}")]
    NotOnRoute { ship: usize, port: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Node {
    pub port: usize,
    pub berth_type: usize,
    pub time: i64,
}

/// An incoming arc of a layer node; `from` indexes the previous layer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub from: u32,
    pub speed: u8,
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub port: usize,
    /// Global node ids, ordered by time then berth type.
    pub nodes: Vec<usize>,
    /// Source arc cost per node (first layer only).
    pub source_cost: Vec<f64>,
    /// Incoming travel arcs per node (all but the first layer).
    pub preds: Vec<Vec<Arc>>,
    /// Position of this layer's first node in the ship-local flat order.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShipGraph {
    pub layers: Vec<Layer>,
}

impl ShipGraph {
    pub fn num_nodes(&self) -> usize {
        self.layers.iter().map(|l| l.nodes.len()).sum()
    }

    /// Source, travel and sink arcs.
    pub fn num_arcs(&self) -> usize {
        let first = self.layers[0].nodes.len();
        let last = self.layers.last().map_or(0, |l| l.nodes.len());
        let travel: usize = self.layers.iter().skip(1).map(|l| l.preds.iter().map(Vec::len).sum::<usize>()).sum();
        first + travel + last
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphOptions {
    /// Keep only the cheapest of parallel speed arcs.
    pub dominance: bool,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { dominance: true }
    }
}

#[derive(Clone, Debug)]
pub struct VoyageGraph {
    nodes: Vec<Node>,
    group_base: Vec<Vec<usize>>,
    ships: Vec<ShipGraph>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nodes: usize,
    pub arcs_per_ship: Vec<usize>,
    pub layer_nodes_per_ship: Vec<usize>,
}

/// Cost of a voyage split into its four components.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub fuel: f64,
    pub handling: f64,
    pub delay: f64,
    pub idle: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.fuel + self.handling + self.delay + self.idle
    }

    pub fn add(&mut self, other: &CostBreakdown) {
        self.fuel += other.fuel;
        self.handling += other.handling;
        self.delay += other.delay;
        self.idle += other.idle;
    }
}

/// A priced o→d path of one ship.
#[derive(Clone, Debug, PartialEq)]
pub struct PricedPath {
    /// Global node per route call.
    pub nodes: Vec<usize>,
    /// Speed level index per leg.
    pub speeds: Vec<u8>,
    /// Pure voyage cost.
    pub cost: f64,
    /// Cost plus the node weights along the path.
    pub weight: f64,
}

fn delay(eft: i64, finish: i64) -> i64 {
    (finish - eft).max(0)
}

fn gammas(instance: &Instance, ship: &Ship) -> Vec<f64> {
    instance
        .speeds_knots
        .levels()
        .iter()
        .map(|&s| fuel_per_distance(ship, s).expect("speed levels are positive"))
        .collect()
}

impl VoyageGraph {
    pub fn build(instance: &Instance) -> Result<Self, GraphError> {
        Self::build_with(instance, GraphOptions::default())
    }

    pub fn build_with(instance: &Instance, options: GraphOptions) -> Result<Self, GraphError> {
        let mut nodes = Vec::new();
        let mut group_base = Vec::new();
        for (p, port) in instance.ports.iter().enumerate() {
            let mut bases = Vec::new();
            for (k, bt) in port.berth_types.iter().enumerate() {
                bases.push(nodes.len());
                for t in bt.open..bt.close {
                    nodes.push(Node { port: p, berth_type: k, time: t });
                }
            }
            group_base.push(bases);
        }
        let mut graph = VoyageGraph { nodes, group_base, ships: Vec::new() };
        for i in 0..instance.ships.len() {
            let sg = graph.build_ship(instance, i, options)?;
            graph.ships.push(sg);
        }
        Ok(graph)
    }

    fn build_ship(&self, instance: &Instance, i: usize, options: GraphOptions) -> Result<ShipGraph, GraphError> {
        let ship = &instance.ships[i];
        let w = instance.costs;
        let gamma = gammas(instance, ship);
        let levels = instance.speeds_knots.levels();
        let mut layers: Vec<Layer> = Vec::new();
        for (r, call) in ship.route.iter().enumerate() {
            let port = &instance.ports[call.port];
            let lo = port.berth_types.iter().map(|b| b.open).min().expect("validated").max(call.start);
            let hi = port.berth_types.iter().map(|b| b.close).max().expect("validated");
            let mut layer_nodes = Vec::new();
            for t in lo..hi {
                for (k, bt) in port.berth_types.iter().enumerate() {
                    if t >= bt.open && t + call.handling[k] <= bt.close {
                        layer_nodes.push(self.node_id(call.port, k, t));
                    }
                }
            }
            let arrival_cost = |node: usize| {
                let n = self.nodes[node];
                let h = call.handling[n.berth_type];
                w.handling * h as f64 + w.delay * delay(call.eft, n.time + h) as f64
            };
            let mut layer = Layer { port: call.port, nodes: layer_nodes, source_cost: Vec::new(), preds: Vec::new(), offset: 0 };
            if r == 0 {
                layer.source_cost = layer.nodes.iter().map(|&v| arrival_cost(v)).collect();
            } else {
                let prev = &layers[r - 1];
                let prev_call = &ship.route[r - 1];
                let d = instance.ports[prev_call.port].distance_to(call.port).expect("validated");
                let sail: Vec<i64> = levels.iter().map(|&s| sailing_hours(d, s)).collect();
                let fuel: Vec<f64> = gamma.iter().map(|g| w.fuel * g * d).collect();
                layer.preds = layer
                    .nodes
                    .iter()
                    .map(|&v| {
                        let tv = self.nodes[v].time;
                        let base = arrival_cost(v);
                        let mut arcs = Vec::new();
                        for (j, &u) in prev.nodes.iter().enumerate() {
                            let nu = self.nodes[u];
                            let dep = nu.time + prev_call.handling[nu.berth_type];
                            for (s, &hours) in sail.iter().enumerate() {
                                let arrival = dep + hours;
                                if arrival > tv {
                                    continue;
                                }
                                let cost = fuel[s] + w.idle * (tv - arrival) as f64 + base;
                                arcs.push(Arc { from: j as u32, speed: s as u8, cost });
                                if options.dominance {
                                    break;
                                }
                            }
                        }
                        arcs
                    })
                    .collect();
            }
            layers.push(layer);
        }
        if layers[0].nodes.is_empty() {
            return Err(GraphError::NoSourceArc { ship: i });
        }
        prune(&mut layers);
        if layers.iter().any(|l| l.nodes.is_empty()) {
            return Err(GraphError::NoVoyage { ship: i });
        }
        let mut offset = 0;
        for l in &mut layers {
            l.offset = offset;
            offset += l.nodes.len();
        }
        Ok(ShipGraph { layers })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn node(&self, id: usize) -> Node {
        self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_id(&self, port: usize, berth_type: usize, time: i64) -> usize {
        let open = self.nodes[self.group_base[port][berth_type]].time;
        self.group_base[port][berth_type] + (time - open) as usize
    }

    /// Node id of `(port, berth_type, time)` if the hour lies in the window.
    pub fn find_node(&self, port: usize, berth_type: usize, time: i64) -> Option<usize> {
        let base = *self.group_base.get(port)?.get(berth_type)?;
        let open = self.nodes[base].time;
        if time < open {
            return None;
        }
        let id = base + (time - open) as usize;
        (id < self.nodes.len() && self.nodes[id].port == port && self.nodes[id].berth_type == berth_type).then_some(id)
    }

    pub fn ship(&self, i: usize) -> &ShipGraph {
        &self.ships[i]
    }

    pub fn num_ships(&self) -> usize {
        self.ships.len()
    }

    pub fn stats(&self) -> GraphStats {
        GraphStats {
            nodes: self.nodes.len(),
            arcs_per_ship: self.ships.iter().map(ShipGraph::num_arcs).collect(),
            layer_nodes_per_ship: self.ships.iter().map(ShipGraph::num_nodes).collect(),
        }
    }

    /// Minimum-weight o→d path of ship `i`. `weights` and `allowed` are
    /// indexed by the ship-local flat node order (`layer.offset + j`).
    /// Ties go to the earliest berthing time, then the lowest berth type.
    /// Returns `None` when no allowed path exists.
    pub fn shortest_path(&self, i: usize, weights: &[f64], allowed: Option<&[bool]>) -> Option<PricedPath> {
        self.shortest_path_scaled(i, weights, allowed, 1.0)
    }

    /// [`shortest_path`](Self::shortest_path) with arc costs multiplied by
    /// `scale` in the path weight; the reported cost stays unscaled.
    pub fn shortest_path_scaled(&self, i: usize, weights: &[f64], allowed: Option<&[bool]>, scale: f64) -> Option<PricedPath> {
        let sg = &self.ships[i];
        let total = sg.num_nodes();
        let ok = |flat: usize| allowed.map_or(true, |a| a[flat]);
        let mut dist = vec![f64::INFINITY; total];
        let mut pred = vec![u32::MAX; total];
        let mut speed = vec![0u8; total];
        let first = &sg.layers[0];
        for j in 0..first.nodes.len() {
            if ok(j) {
                dist[j] = scale * first.source_cost[j] + weights[j];
            }
        }
        for r in 1..sg.layers.len() {
            let (prev, layer) = (&sg.layers[r - 1], &sg.layers[r]);
            for j in 0..layer.nodes.len() {
                let flat = layer.offset + j;
                if !ok(flat) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for arc in &layer.preds[j] {
                    let du = dist[prev.offset + arc.from as usize];
                    let cand = du + scale * arc.cost;
                    if cand < best {
                        best = cand;
                        pred[flat] = arc.from;
                        speed[flat] = arc.speed;
                    }
                }
                if best < f64::INFINITY {
                    dist[flat] = best + weights[flat];
                }
            }
        }
        let last = sg.layers.last().expect("nonempty");
        let mut end = None;
        let mut best = f64::INFINITY;
        for j in 0..last.nodes.len() {
            let d = dist[last.offset + j];
            if d < best {
                best = d;
                end = Some(j);
            }
        }
        let mut j = end?;
        let n_layers = sg.layers.len();
        let mut nodes = vec![0usize; n_layers];
        let mut speeds = vec![0u8; n_layers - 1];
        let mut cost = 0.0;
        for r in (0..n_layers).rev() {
            let layer = &sg.layers[r];
            nodes[r] = layer.nodes[j];
            if r == 0 {
                cost += layer.source_cost[j];
            } else {
                let flat = layer.offset + j;
                let from = pred[flat];
                speeds[r - 1] = speed[flat];
                let arc = layer.preds[j]
                    .iter()
                    .find(|a| a.from == from && a.speed == speed[flat])
                    .expect("recorded arc");
                cost += arc.cost;
                j = from as usize;
            }
        }
        Some(PricedPath { nodes, speeds, cost, weight: best })
    }

    /// Enumerates every o→d path of ship `i` as (nodes, speeds, cost).
    /// Exponential; meant for tiny graphs in tests.
    pub fn all_paths(&self, i: usize) -> Vec<(Vec<usize>, Vec<u8>, f64)> {
        let sg = &self.ships[i];
        let n_layers = sg.layers.len();
        // paths ending at each node of the current layer, as local indices
        let mut partial: Vec<(Vec<usize>, Vec<u8>, f64)> = sg.layers[0]
            .nodes
            .iter()
            .enumerate()
            .map(|(j, _)| (vec![j], Vec::new(), sg.layers[0].source_cost[j]))
            .collect();
        for r in 1..n_layers {
            let layer = &sg.layers[r];
            let mut next = Vec::new();
            for (j, arcs) in layer.preds.iter().enumerate() {
                for arc in arcs {
                    for (p, s, c) in &partial {
                        if *p.last().expect("nonempty") == arc.from as usize {
                            let mut p2 = p.clone();
                            p2.push(j);
                            let mut s2 = s.clone();
                            s2.push(arc.speed);
                            next.push((p2, s2, c + arc.cost));
                        }
                    }
                }
            }
            partial = next;
        }
        partial
            .into_iter()
            .map(|(p, s, c)| (p.iter().enumerate().map(|(r, &j)| sg.layers[r].nodes[j]).collect(), s, c))
            .collect()
    }

    /// `C(n, p, k, t)`: nodes of `(p, k)` whose berthing by ship `n` would
    /// occupy hour `t`.
    pub fn conflict_set(&self, instance: &Instance, ship: usize, port: usize, berth_type: usize, t: i64) -> Result<ConflictSet, GraphError> {
        let bt = instance.ports[port].berth_types[berth_type];
        if t < bt.open || t >= bt.close {
            return Err(GraphError::OutsideWindow { port, berth_type, time: t });
        }
        let call = instance.ships[ship]
            .route
            .iter()
            .find(|c| c.port == port)
            .ok_or(GraphError::NotOnRoute { ship, port })?;
        let h = call.handling[berth_type];
        Ok(ConflictSet { port, berth_type, first: (t - h + 1).max(bt.open), last: t.min(bt.close - 1) })
    }
}

/// Contiguous hour range `[first, last]` of one berth type's nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConflictSet {
    pub port: usize,
    pub berth_type: usize,
    pub first: i64,
    pub last: i64,
}

impl ConflictSet {
    pub fn is_empty(&self) -> bool {
        self.first > self.last
    }

    pub fn contains(&self, time: i64) -> bool {
        self.first <= time && time <= self.last
    }

    pub fn times(&self) -> core::ops::RangeInclusive<i64> {
        self.first..=self.last
    }

    pub fn nodes<'a>(&'a self, graph: &'a VoyageGraph) -> impl Iterator<Item = usize> + 'a {
        self.times().map(move |t| graph.node_id(self.port, self.berth_type, t))
    }
}

/// Drops nodes that lie on no o→d path, remapping arc endpoints.
fn prune(layers: &mut [Layer]) {
    let n = layers.len();
    let mut alive: Vec<Vec<bool>> = layers.iter().map(|l| vec![true; l.nodes.len()]).collect();
    for r in 1..n {
        let (before, after) = alive.split_at_mut(r);
        for (j, arcs) in layers[r].preds.iter().enumerate() {
            after[0][j] = arcs.iter().any(|a| before[r - 1][a.from as usize]);
        }
    }
    for r in (1..n).rev() {
        let mut needed = vec![false; layers[r - 1].nodes.len()];
        for (j, arcs) in layers[r].preds.iter().enumerate() {
            if alive[r][j] {
                for a in arcs {
                    if alive[r - 1][a.from as usize] {
                        needed[a.from as usize] = true;
                    }
                }
            }
        }
        for (flag, need) in alive[r - 1].iter_mut().zip(needed) {
            *flag &= need;
        }
    }
    let mut remap_prev: Vec<u32> = Vec::new();
    for r in 0..n {
        let keep = &alive[r];
        let mut remap = vec![u32::MAX; keep.len()];
        let mut next = 0u32;
        for (j, &k) in keep.iter().enumerate() {
            if k {
                remap[j] = next;
                next += 1;
            }
        }
        let layer = &mut layers[r];
        let old_nodes = core::mem::take(&mut layer.nodes);
        layer.nodes = old_nodes.into_iter().zip(keep).filter(|(_, &k)| k).map(|(v, _)| v).collect();
        if r == 0 {
            let old = core::mem::take(&mut layer.source_cost);
            layer.source_cost = old.into_iter().zip(keep).filter(|(_, &k)| k).map(|(c, _)| c).collect();
        } else {
            let old = core::mem::take(&mut layer.preds);
            layer.preds = old
                .into_iter()
                .zip(keep)
                .filter(|(_, &k)| k)
                .map(|(arcs, _)| {
                    arcs.into_iter()
                        .filter(|a| remap_prev[a.from as usize] != u32::MAX)
                        .map(|a| Arc { from: remap_prev[a.from as usize], ..a })
                        .collect()
                })
                .collect();
        }
        remap_prev = remap;
    }
}

/// Recomputes a voyage's cost from its berthing decisions and leg speeds
/// straight from the cost definitions, without consulting the graph.
pub fn voyage_cost(instance: &Instance, ship: usize, visits: &[Node], speeds: &[u8]) -> CostBreakdown {
    let s = &instance.ships[ship];
    let w = instance.costs;
    let mut out = CostBreakdown::default();
    for (r, (call, v)) in s.route.iter().zip(visits).enumerate() {
        let h = call.handling[v.berth_type];
        out.handling += w.handling * h as f64;
        out.delay += w.delay * delay(call.eft, v.time + h) as f64;
        if r > 0 {
            let prev = &s.route[r - 1];
            let u = visits[r - 1];
            let d = instance.ports[prev.port].distance_to(call.port).expect("validated");
            let speed = instance.speeds_knots.levels()[speeds[r - 1] as usize];
            let arrival = u.time + prev.handling[u.berth_type] + sailing_hours(d, speed);
            out.fuel += w.fuel * fuel_per_distance(s, speed).expect("positive") * d;
            out.idle += w.idle * (v.time - arrival) as f64;
        }
    }
    out
}
