//! Cost-sharing among carriers.
//!
//! Players are carriers. A coalition's cost is the total cost of its ships
//! when they are scheduled jointly, after every outside carrier that
//! outranks all members has been scheduled on its own, in priority order,
//! with its berth usage frozen. Outside carriers that do not outrank every
//! member are ignored.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::colgen::Column;
use crate::lp::{LinearProgram, LpStatus, Sense, Simplex, Tolerances};
use crate::model::Instance;
use crate::search::{solve_reserved, Reservations, SolveOptions, SolveStatus};
use crate::Clock;

/// Most players accepted; coalition values grow as `2^n`.
pub const MAX_PLAYERS: usize = 16;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GameError {
    #[error("a game needs between 1 and {MAX_PLAYERS} players, got {0}")]
    PlayerCount(usize),
    #[error("expected {expected} coalition values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("the empty coalition must have value 0")]
    EmptyCoalition,
    #[error("coalition value for mask {mask} is not finite")]
    NonFinite { mask: usize },
    #[error("player {0} has zero standalone cost; relative savings are undefined")]
    Degenerate(usize),
    #[error("carrier {carrier} has no feasible schedule: {reason}")]
    Infeasible { carrier: usize, reason: String },
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Characteristic function over bitmask coalitions; bit `i` is player `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionGame {
    players: usize,
    values: Vec<f64>,
}

impl CoalitionGame {
    /// `values[mask]` for every mask in `0..2^players`.
    pub fn new(players: usize, values: Vec<f64>) -> Result<Self, GameError> {
        if players == 0 || players > MAX_PLAYERS {
            return Err(GameError::PlayerCount(players));
        }
        if values.len() != 1 << players {
            return Err(GameError::ValueCount { expected: 1 << players, got: values.len() });
        }
        if values[0] != 0.0 {
            return Err(GameError::EmptyCoalition);
        }
        if let Some(mask) = values.iter().position(|v| !v.is_finite()) {
            return Err(GameError::NonFinite { mask });
        }
        Ok(CoalitionGame { players, values })
    }

    pub fn from_fn(players: usize, f: impl Fn(usize) -> f64) -> Result<Self, GameError> {
        Self::new(players, (0..1usize << players).map(|m| if m == 0 { 0.0 } else { f(m) }).collect())
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn value(&self, mask: usize) -> f64 {
        self.values[mask]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grand(&self) -> usize {
        (1 << self.players) - 1
    }

    /// Disjoint coalition pairs whose union costs more than the parts.
    pub fn superadditivity_violations(&self, tol: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 1..=self.grand() {
            for b in a + 1..=self.grand() {
                if a & b == 0 && self.value(a | b) > self.value(a) + self.value(b) + tol {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Whether `x` is efficient and no coalition pays more than its value.
    pub fn in_core(&self, x: &[f64], tol: f64) -> bool {
        let total: f64 = x.iter().sum();
        (total - self.value(self.grand())).abs() <= tol * (1.0 + total.abs())
            && (1..self.grand()).all(|m| coalition_sum(x, m) <= self.value(m) + tol * (1.0 + self.value(m).abs()))
    }
}

fn coalition_sum(x: &[f64], mask: usize) -> f64 {
    x.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, v)| v).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub costs: Vec<f64>,
    /// `(v({i}) − x_i) / v({i})`; `NaN` for a zero standalone cost.
    pub relative_savings: Vec<f64>,
    /// Share of the total savings `Σ v({i}) − v(P)`; `NaN` without savings.
    pub savings_share: Vec<f64>,
    pub stable: bool,
}

impl Allocation {
    pub fn new(game: &CoalitionGame, costs: Vec<f64>) -> Allocation {
        let standalone: Vec<f64> = (0..game.players).map(|i| game.value(1 << i)).collect();
        let total_savings = standalone.iter().sum::<f64>() - game.value(game.grand());
        let relative_savings = costs.iter().zip(&standalone).map(|(x, v)| (v - x) / v).collect();
        let savings_share = costs.iter().zip(&standalone).map(|(x, v)| (v - x) / total_savings).collect();
        let stable = game.in_core(&costs, 1e-6);
        Allocation { costs, relative_savings, savings_share, stable }
    }
}

/// Average marginal contribution over all player orders.
pub fn shapley(game: &CoalitionGame) -> Allocation {
    let n = game.players;
    let mut fact = vec![1.0f64; n + 1];
    for k in 1..=n {
        fact[k] = fact[k - 1] * k as f64;
    }
    let mut x = vec![0.0; n];
    for (i, xi) in x.iter_mut().enumerate() {
        let bit = 1 << i;
        for s in 0..=game.grand() {
            if s & bit != 0 {
                continue;
            }
            let size = s.count_ones() as usize;
            let weight = fact[size] * fact[n - size - 1] / fact[n];
            *xi += weight * (game.value(s | bit) - game.value(s));
        }
    }
    Allocation::new(game, x)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpmOutcome {
    Stable { allocation: Allocation, max_difference: f64 },
    CoreEmpty,
}

/// Explicit constraint system of the equal-profit LP. Variables are
/// `x_0 … x_{n−1}, z`; `z ≥ 0` since the pair rows hold in both orders.
pub fn epm_program(game: &CoalitionGame) -> Result<LinearProgram, GameError> {
    let n = game.players;
    let v: Vec<f64> = (0..n).map(|i| game.value(1 << i)).collect();
    if let Some(i) = v.iter().position(|&x| x == 0.0) {
        return Err(GameError::Degenerate(i));
    }
    let mut lp = LinearProgram::new();
    for _ in 0..n {
        lp.add_variable(0.0, 0.0, f64::INFINITY);
    }
    let z = lp.add_variable(1.0, 0.0, f64::INFINITY);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                lp.add_row(vec![(z, 1.0), (i, -1.0 / v[i]), (j, 1.0 / v[j])], Sense::Ge, 0.0);
            }
        }
    }
    lp.add_row((0..n).map(|i| (i, 1.0)).collect(), Sense::Eq, game.value(game.grand()));
    for m in 1..game.grand() {
        let row = (0..n).filter(|i| m >> i & 1 == 1).map(|i| (i, 1.0)).collect();
        lp.add_row(row, Sense::Le, game.value(m));
    }
    Ok(lp)
}

/// Stable allocation minimizing the largest gap in relative savings, or
/// `CoreEmpty` when no stable allocation exists.
pub fn epm(game: &CoalitionGame) -> Result<EpmOutcome, GameError> {
    let program = epm_program(game)?;
    let mut lp = Simplex::from_program(&program, Tolerances::default());
    match lp.solve() {
        LpStatus::Optimal => {
            let n = game.players;
            let x: Vec<f64> = (0..n).map(|i| lp.value(i)).collect();
            Ok(EpmOutcome::Stable { allocation: Allocation::new(game, x), max_difference: lp.value(n) })
        }
        LpStatus::Infeasible => Ok(EpmOutcome::CoreEmpty),
        s => Err(GameError::Solver(format!("EPM LP ended with status {s:?}"))),
    }
}

/// Instance restricted to `ships`, renumbered in the given order.
fn sub_instance(instance: &Instance, ships: &[usize]) -> Instance {
    let mut out = instance.clone();
    out.ships = ships.iter().map(|&i| instance.ships[i].clone()).collect();
    for (j, s) in out.ships.iter_mut().enumerate() {
        s.id = j;
    }
    out
}

/// Players in ascending carrier id with their ships.
pub fn carriers(instance: &Instance) -> Vec<(usize, Vec<usize>)> {
    let mut by: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in instance.ships.iter().enumerate() {
        by.entry(s.carrier).or_default().push(i);
    }
    by.into_iter().collect()
}

/// A coalition's schedule.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalitionPlan {
    pub cost: f64,
    /// Voyages of the coalition's ships, with instance ship indices.
    pub columns: Vec<Column>,
    /// Whether every solve on the way proved optimality.
    pub proven: bool,
}

fn schedule_group<C: Clock + ?Sized>(
    instance: &Instance,
    ships: &[usize],
    carrier: usize,
    reserved: &Reservations,
    options: &SolveOptions,
    clock: &C,
) -> Result<CoalitionPlan, GameError> {
    let sub = sub_instance(instance, ships);
    let out = solve_reserved(&sub, options, reserved, clock).map_err(|e| GameError::Solver(format!("{e}")))?;
    let proven = out.report.status == SolveStatus::Optimal;
    let Some(cost) = out.report.objective else {
        let reason = match out.report.status {
            SolveStatus::TimeLimit => String::from("time limit reached without a schedule"),
            _ => String::from("no schedule fits the remaining berth capacity"),
        };
        return Err(GameError::Infeasible { carrier, reason });
    };
    let columns = out
        .columns
        .into_iter()
        .map(|mut c| {
            c.ship = ships[c.ship];
            c
        })
        .collect();
    Ok(CoalitionPlan { cost, columns, proven })
}

fn reserve(instance: &Instance, columns: &[Column], reserved: &mut Reservations) {
    for c in columns {
        for (call, v) in instance.ships[c.ship].route.iter().zip(&c.visits) {
            for t in v.time..v.time + call.handling[v.berth_type] {
                *reserved.entry((v.port, v.berth_type, t)).or_insert(0) += 1;
            }
        }
    }
}

/// Schedules coalition `mask` of the players listed by [`carriers`].
/// `priority[i]` ranks player `i`; lower numbers go first.
pub fn coalition_plan<C: Clock + ?Sized>(
    instance: &Instance,
    priority: &[u32],
    mask: usize,
    options: &SolveOptions,
    clock: &C,
) -> Result<CoalitionPlan, GameError> {
    let players = carriers(instance);
    let top = (0..players.len()).filter(|i| mask >> i & 1 == 1).map(|i| priority[i]).min().expect("nonempty coalition");
    let mut before: Vec<usize> = (0..players.len()).filter(|&i| mask >> i & 1 == 0 && priority[i] < top).collect();
    before.sort_by_key(|&i| (priority[i], i));
    let mut reserved = Reservations::new();
    let mut proven = true;
    for i in before {
        let plan = schedule_group(instance, &players[i].1, players[i].0, &reserved, options, clock)?;
        proven &= plan.proven;
        reserve(instance, &plan.columns, &mut reserved);
    }
    let ships: Vec<usize> = players.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).flat_map(|(_, p)| p.1.iter().copied()).collect();
    let first = players.iter().enumerate().find(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| p.0).expect("nonempty");
    let mut plan = schedule_group(instance, &ships, first, &reserved, options, clock)?;
    plan.proven &= proven;
    plan.columns.sort_by_key(|c| c.ship);
    Ok(plan)
}

/// Cost of coalition `mask`.
pub fn characteristic_function<C: Clock + ?Sized>(
    instance: &Instance,
    priority: &[u32],
    mask: usize,
    options: &SolveOptions,
    clock: &C,
) -> Result<f64, GameError> {
    coalition_plan(instance, priority, mask, options, clock).map(|p| p.cost)
}

/// Handling plus delay cost per port.
pub fn terminal_costs(instance: &Instance, columns: &[Column]) -> Vec<f64> {
    let w = instance.costs;
    let mut out = vec![0.0; instance.ports.len()];
    for c in columns {
        for (call, v) in instance.ships[c.ship].route.iter().zip(&c.visits) {
            let h = call.handling[v.berth_type];
            out[v.port] += w.handling * h as f64 + w.delay * (v.time + h - call.eft).max(0) as f64;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortSavings {
    pub port: usize,
    pub standalone: f64,
    pub grand: f64,
    /// `100 (standalone − grand) / standalone`; 0 when both are 0.
    pub savings_percent: f64,
}

/// Per-port terminal cost of the standalone plans against the grand plan.
pub fn terminal_savings(instance: &Instance, standalone: &[CoalitionPlan], grand: &CoalitionPlan) -> Vec<PortSavings> {
    let mut a = vec![0.0; instance.ports.len()];
    for p in standalone {
        for (x, y) in a.iter_mut().zip(terminal_costs(instance, &p.columns)) {
            *x += y;
        }
    }
    let b = terminal_costs(instance, &grand.columns);
    a.into_iter()
        .zip(b)
        .enumerate()
        .map(|(port, (s, g))| PortSavings { port, standalone: s, grand: g, savings_percent: if s > 0.0 { 100.0 * (s - g) / s } else { 0.0 } })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionRecord {
    pub mask: usize,
    /// Carrier ids in the coalition.
    pub carriers: Vec<usize>,
    pub cost: Option<f64>,
    pub proven_optimal: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameAnalysis {
    /// Carrier id per player.
    pub carriers: Vec<usize>,
    pub priority: Vec<u32>,
    pub coalitions: Vec<CoalitionRecord>,
    pub shapley: Option<Allocation>,
    pub epm: Option<EpmOutcome>,
    pub epm_error: Option<String>,
    pub superadditivity_violations: Vec<(usize, usize)>,
    pub terminal: Option<Vec<PortSavings>>,
}

/// Solves every coalition of `instance` (windows used as given) and
/// assembles both allocations and the terminal comparison.
pub fn analyze<C: Clock + ?Sized>(instance: &Instance, priority: &[u32], options: &SolveOptions, clock: &C) -> Result<GameAnalysis, GameError> {
    let players = carriers(instance);
    let n = players.len();
    if n == 0 || n > MAX_PLAYERS || priority.len() != n {
        return Err(GameError::PlayerCount(n));
    }
    let mut plans: Vec<Option<CoalitionPlan>> = vec![None; 1 << n];
    let mut coalitions = Vec::new();
    for mask in 1..1usize << n {
        let ids = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| players[i].0).collect();
        match coalition_plan(instance, priority, mask, options, clock) {
            Ok(p) => {
                coalitions.push(CoalitionRecord { mask, carriers: ids, cost: Some(p.cost), proven_optimal: p.proven, error: None });
                plans[mask] = Some(p);
            }
            Err(e) => coalitions.push(CoalitionRecord { mask, carriers: ids, cost: None, proven_optimal: false, error: Some(format!("{e}")) }),
        }
    }
    let complete = plans[1..].iter().all(Option::is_some);
    let game = complete
        .then(|| CoalitionGame::from_fn(n, |m| plans[m].as_ref().map_or(f64::NAN, |p| p.cost)))
        .transpose()?;
    let shapley_alloc = game.as_ref().map(shapley);
    let (epm_out, epm_error) = match game.as_ref().map(epm) {
        Some(Ok(o)) => (Some(o), None),
        Some(Err(e)) => (None, Some(format!("{e}"))),
        None => (None, None),
    };
    let violations = game.as_ref().map(|g| g.superadditivity_violations(1e-6)).unwrap_or_default();
    let grand = (1usize << n) - 1;
    let terminal = (0..n)
        .map(|i| plans[1 << i].clone())
        .collect::<Option<Vec<_>>>()
        .zip(plans[grand].as_ref())
        .map(|(alone, g)| terminal_savings(instance, &alone, g));
    Ok(GameAnalysis {
        carriers: players.iter().map(|p| p.0).collect(),
        priority: priority.to_vec(),
        coalitions,
        shapley: shapley_alloc,
        epm: epm_out,
        epm_error,
        superadditivity_violations: violations,
        terminal,
    })
}
