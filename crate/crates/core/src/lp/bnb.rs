//! Best-first branch and bound over binary variables of a linear program.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use super::{LinearProgram, LpError, LpStatus, Simplex, Tolerances};
use crate::Clock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnbStatus {
    /// Search finished; the incumbent is optimal.
    Optimal,
    /// Budget ran out with an incumbent in hand.
    TimeLimit,
    /// Budget ran out before any integral solution was found.
    NoIncumbent,
    /// No assignment of the binaries is feasible.
    Infeasible,
}

#[derive(Clone, Copy, Debug)]
pub struct BnbOptions {
    /// Seconds measured on the supplied clock.
    pub time_budget: f64,
    /// Only solutions strictly cheaper than this are of interest.
    pub cutoff: f64,
    pub max_nodes: usize,
}

impl Default for BnbOptions {
    fn default() -> Self {
        BnbOptions { time_budget: f64::INFINITY, cutoff: f64::INFINITY, max_nodes: usize::MAX }
    }
}

#[derive(Clone, Debug)]
pub struct BnbOutcome {
    pub status: BnbStatus,
    /// Incumbent objective, `+∞` without one.
    pub objective: f64,
    pub solution: Option<Vec<f64>>,
    /// Best proven lower bound.
    pub bound: f64,
    /// Nodes evaluated after the root.
    pub nodes: usize,
}

struct Open {
    bound: f64,
    depth: usize,
    seq: usize,
    fixings: Vec<(usize, f64)>,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    // Max-heap: lowest bound first, then deeper, then older.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then(self.depth.cmp(&other.depth))
            .then(other.seq.cmp(&self.seq))
    }
}

/// Solves `program` with the listed variables restricted to {0, 1}.
pub fn branch_and_bound_binary<C: Clock + ?Sized>(
    program: &LinearProgram,
    binary_vars: &[usize],
    options: BnbOptions,
    clock: &C,
) -> Result<BnbOutcome, LpError> {
    program.validate()?;
    let tol = Tolerances::default();
    let start = clock.now();
    let mut lp = Simplex::from_program(program, tol);
    for &j in binary_vars {
        lp.set_bounds(j, program.lower[j].max(0.0), program.upper[j].min(1.0));
    }
    let base: Vec<(f64, f64)> = binary_vars.iter().map(|&j| lp.bounds(j)).collect();

    let mut incumbent = options.cutoff;
    let mut best: Option<Vec<f64>> = None;
    let mut heap = BinaryHeap::new();
    heap.push(Open { bound: f64::NEG_INFINITY, depth: 0, seq: 0, fixings: Vec::new() });
    let mut seq = 1;
    let mut evaluated = 0usize;
    let mut exhausted = true;

    while let Some(node) = heap.pop() {
        if node.bound >= incumbent - 1e-9 {
            continue;
        }
        if clock.now() - start >= options.time_budget || evaluated > options.max_nodes {
            heap.push(node);
            exhausted = false;
            break;
        }
        for (&j, &(lo, up)) in binary_vars.iter().zip(&base) {
            lp.set_bounds(j, lo, up);
        }
        for &(j, v) in &node.fixings {
            lp.set_bounds(j, v, v);
        }
        evaluated += 1;
        match lp.solve() {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded | LpStatus::IterationLimit => {
                heap.push(node);
                exhausted = false;
                break;
            }
        }
        let bound = lp.objective().max(node.bound);
        if bound >= incumbent - 1e-9 {
            continue;
        }
        let mut branch_var = None;
        let mut best_frac = tol.integrality;
        for &j in binary_vars {
            let x = lp.value(j);
            let frac = (x - libm::floor(x)).min(libm::ceil(x) - x);
            if frac > best_frac + 1e-12 {
                best_frac = frac;
                branch_var = Some(j);
            }
        }
        match branch_var {
            None => {
                incumbent = bound;
                best = Some(lp.values().to_vec());
            }
            Some(j) => {
                for v in [1.0, 0.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    heap.push(Open { bound, depth: node.depth + 1, seq, fixings });
                    seq += 1;
                }
            }
        }
    }

    let open_bound = heap
        .iter()
        .filter(|n| n.bound < incumbent - 1e-9)
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min);
    let (status, bound) = match (&best, exhausted) {
        (Some(_), true) => (BnbStatus::Optimal, incumbent),
        (None, true) => (BnbStatus::Infeasible, f64::INFINITY),
        (Some(_), false) => (BnbStatus::TimeLimit, open_bound.min(incumbent)),
        (None, false) => (BnbStatus::NoIncumbent, open_bound),
    };
    Ok(BnbOutcome {
        status,
        objective: if best.is_some() { incumbent } else { f64::INFINITY },
        solution: best,
        bound,
        nodes: evaluated.saturating_sub(1),
    })
}
