//! Interval cuts on one berth type.
//!
//! For a distinguished ship `n` and hours `t1 < t2` at berth type `(p, k)`:
//! every other ship whose berthing covers both `t1` and `t2` occupies the
//! whole range, and ship `n`, if it berths so as to cover any hour in the
//! range, shares one of those hours with all of them. Hence
//!
//! ```text
//!   Σ_{ship n berths in U} λ + Σ_{m ≠ n} Σ_{ship m berths in I_m} λ ≤ β^k
//!   U   = [t1 − h_n + 1, t2]       (berthing starts covering some hour of [t1, t2])
//!   I_m = [t2 − h_m + 1, t1]       (berthing starts covering both t1 and t2)
//! ```
//!
//! with both ranges clipped to the operating window.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::colgen::Column;
use crate::graph::Node;
use crate::model::Instance;

/// Violation margin required before a cut is reported.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cut {
    pub ship: usize,
    pub port: usize,
    pub berth_type: usize,
    pub t1: i64,
    pub t2: i64,
}

impl Cut {
    /// Range of berthing start hours of `ship` at the cut's berth type
    /// that carry coefficient 1, or `None` if there are none.
    pub fn interval(&self, instance: &Instance, ship: usize) -> Option<(i64, i64)> {
        let bt = instance.ports[self.port].berth_types[self.berth_type];
        let call = instance.ships[ship].route.iter().find(|c| c.port == self.port)?;
        let h = call.handling[self.berth_type];
        let (lo, hi) = if ship == self.ship { (self.t1 - h + 1, self.t2) } else { (self.t2 - h + 1, self.t1) };
        let (lo, hi) = (lo.max(bt.open), hi.min(bt.close - 1));
        (lo <= hi).then_some((lo, hi))
    }

    /// Whether some ship other than the distinguished one has a nonempty
    /// intersection range; otherwise the cut is dominated by capacity rows.
    pub fn is_useful(&self, instance: &Instance) -> bool {
        (0..instance.ships.len()).any(|m| m != self.ship && self.interval(instance, m).is_some())
    }

    /// Coefficient of a voyage of `ship` berthing at `visit` (one of its calls).
    pub fn covers(&self, instance: &Instance, ship: usize, visit: Node) -> bool {
        visit.port == self.port
            && visit.berth_type == self.berth_type
            && self.interval(instance, ship).is_some_and(|(lo, hi)| lo <= visit.time && visit.time <= hi)
    }

    pub fn rhs(&self, instance: &Instance) -> f64 {
        instance.ports[self.port].berth_types[self.berth_type].count as f64
    }
}

/// The cut row's coefficient for a column: 1 if the column's visit to the
/// cut's berth type starts inside the relevant range.
pub fn cut_row_coefficient(instance: &Instance, cut: &Cut, column: &Column) -> u8 {
    column.visits.iter().any(|&v| cut.covers(instance, column.ship, v)) as u8
}

/// Cut hours `(t1, t2)` derived from berthing times `t1s ≤ t2s` of ship `n`
/// and `t3s` of another ship `m`, spreading the slack of the conflict
/// inequalities over both ranges. `window` is `[open, close)`.
pub fn compute_cut_interval(t1s: i64, t2s: i64, t3s: i64, h_n: i64, h_m: i64, window: (i64, i64)) -> Option<(i64, i64)> {
    let (open, close) = window;
    if t1s > t2s || t1s + h_n <= t3s || t2s >= t3s + h_m {
        return None;
    }
    let dx = t1s + h_n - t3s - 1;
    let dy = t3s + h_m - t2s - 1;
    let base1 = t1s + h_n - 1;
    let cap_x = dx.min(base1 - open).max(0);
    let cap_y = dy.min(close - 1 - t2s).max(0);
    let mut x = (dx + 1) / 2;
    let mut y = (dy + 1) / 2;
    if x > cap_x {
        y = (y + x - cap_x).min(cap_y);
        x = cap_x;
    }
    if y > cap_y {
        x = (x + y - cap_y).min(cap_x);
        y = cap_y;
    }
    let (t1, t2) = (base1 - x, t2s + y);
    (t1 < t2 && open <= t1 && t2 < close).then_some((t1, t2))
}

/// Deduplicated global store of cuts.
#[derive(Clone, Debug, Default)]
pub struct CutPool {
    cuts: Vec<Cut>,
    keys: BTreeSet<Cut>,
}

impl CutPool {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `cut` unless already present; returns whether it was new.
    pub fn insert(&mut self, cut: Cut) -> bool {
        if self.keys.insert(cut) {
            self.cuts.push(cut);
            true
        } else {
            false
        }
    }

    pub fn contains(&self, cut: &Cut) -> bool {
        self.keys.contains(cut)
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[Cut] {
        &self.cuts
    }
}

/// Left-hand side of a cut under column weights.
pub fn cut_lhs(instance: &Instance, cut: &Cut, solution: &[(&Column, f64)]) -> f64 {
    solution
        .iter()
        .filter(|(c, _)| cut_row_coefficient(instance, cut, c) == 1)
        .map(|(_, v)| v)
        .sum()
}

/// Solution-based separation: builds candidate cuts from triples of
/// berthing times present in the fractional solution and returns those
/// violated by more than [`VIOLATION_TOL`] that are not in `pool`.
/// Candidates are scanned in ascending `(port, type, ship, t1*, t2*, other
/// ship, t3*)` order.
pub fn separate_cuts(instance: &Instance, solution: &[(&Column, f64)], pool: &CutPool) -> Vec<Cut> {
    let mut times: BTreeMap<(usize, usize), BTreeMap<usize, BTreeSet<i64>>> = BTreeMap::new();
    for (col, v) in solution {
        if *v <= VIOLATION_TOL {
            continue;
        }
        for visit in &col.visits {
            times
                .entry((visit.port, visit.berth_type))
                .or_default()
                .entry(col.ship)
                .or_default()
                .insert(visit.time);
        }
    }
    let mut seen = BTreeSet::new();
    let mut found = Vec::new();
    for (&(p, k), by_ship) in &times {
        if by_ship.len() < 2 {
            continue;
        }
        let bt = instance.ports[p].berth_types[k];
        let handling = |ship: usize| {
            instance.ships[ship].route.iter().find(|c| c.port == p).map(|c| c.handling[k]).expect("visited port")
        };
        for (&n, tn) in by_ship {
            let h_n = handling(n);
            let tn: Vec<i64> = tn.iter().copied().collect();
            for (a, &t1s) in tn.iter().enumerate() {
                for &t2s in &tn[a..] {
                    for (&m, tm) in by_ship {
                        if m == n {
                            continue;
                        }
                        let h_m = handling(m);
                        for &t3s in tm {
                            let Some((t1, t2)) = compute_cut_interval(t1s, t2s, t3s, h_n, h_m, (bt.open, bt.close)) else {
                                continue;
                            };
                            let cut = Cut { ship: n, port: p, berth_type: k, t1, t2 };
                            if pool.contains(&cut) || !seen.insert(cut) || !cut.is_useful(instance) {
                                continue;
                            }
                            if cut_lhs(instance, &cut, solution) > cut.rhs(instance) + VIOLATION_TOL {
                                found.push(cut);
                            }
                        }
                    }
                }
            }
        }
    }
    found
}
