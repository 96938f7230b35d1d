//! Bounded-variable primal revised simplex.
//!
//! Every row `i` gets a slack `s_i` with `a_i·x + s_i = rhs_i`; the slack
//! bounds encode the row sense. Infeasible bases are repaired by a composite
//! phase 1 whose cost vector is rebuilt every iteration from the current
//! bound violations, so warm starts after bound changes or new rows need no
//! separate restart.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::lu::LuFactor;
use super::{LinearProgram, LpError, LpSolution, LpStatus, Sense, Tolerances};

const REFACTOR_INTERVAL: usize = 64;
const BLAND_AFTER: usize = 100;
const PARTIAL_PRICING_ABOVE: usize = 4000;
const PRICING_SEGMENT: usize = 2000;
const NONBASIC: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Var {
    Col(u32),
    Slack(u32),
}

/// Status of one variable in a basis snapshot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable resting at zero.
    Zero,
}

/// A basis snapshot usable to warm start a program of the same shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub columns: Vec<VarStatus>,
    pub rows: Vec<VarStatus>,
}

/// Incremental simplex state: columns and rows can be appended, bounds and
/// right-hand sides changed, and the model re-solved from the last basis.
#[derive(Clone, Debug)]
pub struct Simplex {
    tol: Tolerances,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cols: Vec<Vec<(u32, f64)>>,
    rhs: Vec<f64>,
    slack_lower: Vec<f64>,
    slack_upper: Vec<f64>,
    x_col: Vec<f64>,
    x_slack: Vec<f64>,
    pos_col: Vec<u32>,
    pos_slack: Vec<u32>,
    head: Vec<Var>,
    lu: Option<LuFactor>,
    needs_refactor: bool,
    values_dirty: bool,
    status: LpStatus,
    y: Vec<f64>,
    iterations: usize,
    max_iterations: Option<usize>,
    cursor: usize,
    work: Vec<f64>,
}

enum Step {
    Flip,
    Pivot { pos: usize, target: f64 },
    Unbounded,
}

fn slack_bounds(sense: Sense) -> (f64, f64) {
    match sense {
        Sense::Le => (0.0, f64::INFINITY),
        Sense::Ge => (f64::NEG_INFINITY, 0.0),
        Sense::Eq => (0.0, 0.0),
    }
}

fn resting_value(lower: f64, upper: f64) -> f64 {
    if lower.is_finite() {
        lower
    } else if upper.is_finite() {
        upper
    } else {
        0.0
    }
}

impl Simplex {
    pub fn new(tol: Tolerances) -> Self {
        Simplex {
            tol,
            cost: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            cols: Vec::new(),
            rhs: Vec::new(),
            slack_lower: Vec::new(),
            slack_upper: Vec::new(),
            x_col: Vec::new(),
            x_slack: Vec::new(),
            pos_col: Vec::new(),
            pos_slack: Vec::new(),
            head: Vec::new(),
            lu: None,
            needs_refactor: true,
            values_dirty: true,
            status: LpStatus::IterationLimit,
            y: Vec::new(),
            iterations: 0,
            max_iterations: None,
            cursor: 0,
            work: Vec::new(),
        }
    }

    /// Loads a program; the caller is expected to have validated it.
    pub fn from_program(program: &LinearProgram, tol: Tolerances) -> Self {
        let mut s = Simplex::new(tol);
        for j in 0..program.num_vars() {
            s.add_column(program.objective[j], program.lower[j], program.upper[j], &[]);
        }
        for row in &program.rows {
            s.add_row(&row.coeffs, row.sense, row.rhs);
        }
        s
    }

    pub fn num_vars(&self) -> usize {
        self.cost.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn tolerances(&self) -> Tolerances {
        self.tol
    }

    /// Caps the pivots of each `solve` call; `None` picks a size-based cap.
    pub fn set_max_iterations(&mut self, cap: Option<usize>) {
        self.max_iterations = cap;
    }

    /// Appends a nonbasic column; `entries` are (row, coefficient) pairs.
    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64, entries: &[(usize, f64)]) -> usize {
        let j = self.cost.len();
        self.cost.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        let mut col: Vec<(u32, f64)> = entries.iter().filter(|e| e.1 != 0.0).map(|&(i, a)| (i as u32, a)).collect();
        col.sort_by_key(|e| e.0);
        let value = resting_value(lower, upper);
        if value != 0.0 && !col.is_empty() {
            self.values_dirty = true;
        }
        self.cols.push(col);
        self.x_col.push(value);
        self.pos_col.push(NONBASIC);
        j
    }

    /// Appends a row whose slack enters the basis.
    pub fn add_row(&mut self, entries: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let i = self.rhs.len();
        let mut activity = 0.0;
        for &(j, a) in entries {
            if a != 0.0 {
                self.cols[j].push((i as u32, a));
                activity += a * self.x_col[j];
            }
        }
        let (lo, up) = slack_bounds(sense);
        self.rhs.push(rhs);
        self.slack_lower.push(lo);
        self.slack_upper.push(up);
        self.x_slack.push(rhs - activity);
        self.pos_slack.push(self.head.len() as u32);
        self.head.push(Var::Slack(i as u32));
        self.y.push(0.0);
        self.needs_refactor = true;
        i
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        let was_upper = self.pos_col[var] == NONBASIC && self.x_col[var] == self.upper[var] && self.x_col[var] != self.lower[var];
        self.lower[var] = lower;
        self.upper[var] = upper;
        if self.pos_col[var] == NONBASIC {
            let value = if was_upper && upper.is_finite() { upper } else { resting_value(lower, upper) };
            if value != self.x_col[var] {
                self.x_col[var] = value;
                self.values_dirty = true;
            }
        }
    }

    pub fn bounds(&self, var: usize) -> (f64, f64) {
        (self.lower[var], self.upper[var])
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.cost[var] = cost;
    }

    pub fn set_rhs(&mut self, row: usize, rhs: f64) {
        if self.rhs[row] != rhs {
            self.rhs[row] = rhs;
            self.values_dirty = true;
        }
    }

    pub fn status(&self) -> LpStatus {
        self.status
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn objective(&self) -> f64 {
        self.cost.iter().zip(&self.x_col).map(|(c, x)| c * x).sum()
    }

    pub fn value(&self, var: usize) -> f64 {
        self.x_col[var]
    }

    pub fn values(&self) -> &[f64] {
        &self.x_col
    }

    /// Row dual from the last optimal solve.
    pub fn dual(&self, row: usize) -> f64 {
        self.y[row]
    }

    pub fn duals(&self) -> &[f64] {
        &self.y
    }

    pub fn reduced_cost(&self, var: usize) -> f64 {
        self.cost[var] - self.dot_col(var, &self.y)
    }

    pub fn solution(&self) -> LpSolution {
        LpSolution {
            status: self.status,
            objective: self.objective(),
            primal: self.x_col.clone(),
            duals: self.y.clone(),
            reduced_costs: (0..self.num_vars()).map(|j| self.reduced_cost(j)).collect(),
            iterations: self.iterations,
        }
    }

    pub fn basis(&self) -> Basis {
        let status = |pos: u32, x: f64, lo: f64, up: f64| {
            if pos != NONBASIC {
                VarStatus::Basic
            } else if x == lo {
                VarStatus::AtLower
            } else if x == up {
                VarStatus::AtUpper
            } else {
                VarStatus::Zero
            }
        };
        Basis {
            columns: (0..self.num_vars())
                .map(|j| status(self.pos_col[j], self.x_col[j], self.lower[j], self.upper[j]))
                .collect(),
            rows: (0..self.num_rows())
                .map(|i| status(self.pos_slack[i], self.x_slack[i], self.slack_lower[i], self.slack_upper[i]))
                .collect(),
        }
    }

    pub fn set_basis(&mut self, basis: &Basis) -> Result<(), LpError> {
        let m = self.num_rows();
        if basis.columns.len() != self.num_vars() || basis.rows.len() != m {
            return Err(LpError::BasisMismatch);
        }
        let basic = basis.columns.iter().chain(&basis.rows).filter(|s| **s == VarStatus::Basic).count();
        if basic != m {
            return Err(LpError::BasisMismatch);
        }
        let nonbasic_value = |s: VarStatus, lo: f64, up: f64| match s {
            VarStatus::AtLower if lo.is_finite() => lo,
            VarStatus::AtUpper if up.is_finite() => up,
            _ => resting_value(lo, up),
        };
        self.head.clear();
        for (j, &s) in basis.columns.iter().enumerate() {
            if s == VarStatus::Basic {
                self.pos_col[j] = self.head.len() as u32;
                self.head.push(Var::Col(j as u32));
            } else {
                self.pos_col[j] = NONBASIC;
                self.x_col[j] = nonbasic_value(s, self.lower[j], self.upper[j]);
            }
        }
        for (i, &s) in basis.rows.iter().enumerate() {
            if s == VarStatus::Basic {
                self.pos_slack[i] = self.head.len() as u32;
                self.head.push(Var::Slack(i as u32));
            } else {
                self.pos_slack[i] = NONBASIC;
                self.x_slack[i] = nonbasic_value(s, self.slack_lower[i], self.slack_upper[i]);
            }
        }
        self.needs_refactor = true;
        Ok(())
    }

    fn dot_col(&self, j: usize, y: &[f64]) -> f64 {
        self.cols[j].iter().map(|&(i, a)| a * y[i as usize]).sum()
    }

    fn bounds_of(&self, v: Var) -> (f64, f64) {
        match v {
            Var::Col(j) => (self.lower[j as usize], self.upper[j as usize]),
            Var::Slack(i) => (self.slack_lower[i as usize], self.slack_upper[i as usize]),
        }
    }

    fn value_of(&self, v: Var) -> f64 {
        match v {
            Var::Col(j) => self.x_col[j as usize],
            Var::Slack(i) => self.x_slack[i as usize],
        }
    }

    fn set_value(&mut self, v: Var, x: f64) {
        match v {
            Var::Col(j) => self.x_col[j as usize] = x,
            Var::Slack(i) => self.x_slack[i as usize] = x,
        }
    }

    fn set_pos(&mut self, v: Var, pos: u32) {
        match v {
            Var::Col(j) => self.pos_col[j as usize] = pos,
            Var::Slack(i) => self.pos_slack[i as usize] = pos,
        }
    }

    fn var_of_key(&self, key: usize) -> Var {
        let n = self.num_vars();
        if key < n {
            Var::Col(key as u32)
        } else {
            Var::Slack((key - n) as u32)
        }
    }

    fn scatter(&self, v: Var, out: &mut [f64]) {
        out.iter_mut().for_each(|e| *e = 0.0);
        match v {
            Var::Col(j) => {
                for &(i, a) in &self.cols[j as usize] {
                    out[i as usize] = a;
                }
            }
            Var::Slack(i) => out[i as usize] = 1.0,
        }
    }

    /// Rebuilds the factorization, repairing a singular basis with slacks.
    fn refactor(&mut self) {
        let m = self.num_rows();
        loop {
            let columns: Vec<Vec<(u32, f64)>> = self
                .head
                .iter()
                .map(|&v| match v {
                    Var::Col(j) => self.cols[j as usize].clone(),
                    Var::Slack(i) => vec![(i, 1.0)],
                })
                .collect();
            match LuFactor::factorize(m, &columns) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    break;
                }
                Err(singular) => {
                    for (&pos, &row) in singular.positions.iter().zip(&singular.rows) {
                        let out = self.head[pos];
                        let (lo, up) = self.bounds_of(out);
                        let x = self.value_of(out);
                        let rest = if lo.is_finite() && (!up.is_finite() || (x - lo).abs() <= (up - x).abs()) {
                            lo
                        } else if up.is_finite() {
                            up
                        } else {
                            0.0
                        };
                        self.set_value(out, rest);
                        self.set_pos(out, NONBASIC);
                        self.head[pos] = Var::Slack(row as u32);
                        self.pos_slack[row] = pos as u32;
                    }
                }
            }
        }
        self.needs_refactor = false;
        self.recompute_basics();
    }

    /// `x_B = B⁻¹ (rhs − N x_N)`.
    fn recompute_basics(&mut self) {
        let m = self.num_rows();
        let mut b = self.rhs.clone();
        for j in 0..self.num_vars() {
            if self.pos_col[j] == NONBASIC && self.x_col[j] != 0.0 {
                let x = self.x_col[j];
                for &(i, a) in &self.cols[j] {
                    b[i as usize] -= a * x;
                }
            }
        }
        for i in 0..m {
            if self.pos_slack[i] == NONBASIC {
                b[i] -= self.x_slack[i];
            }
        }
        let mut work = core::mem::take(&mut self.work);
        self.lu.as_ref().expect("factorized").ftran(&mut b, &mut work);
        self.work = work;
        for pos in 0..m {
            self.set_value(self.head[pos], b[pos]);
        }
        self.values_dirty = false;
    }

    /// Fills the basic cost vector, returning whether phase 1 is active.
    fn basic_costs(&self, cb: &mut [f64]) -> bool {
        let ftol = self.tol.feasibility;
        let mut infeasible = false;
        for (pos, &v) in self.head.iter().enumerate() {
            let (lo, up) = self.bounds_of(v);
            let x = self.value_of(v);
            cb[pos] = if x < lo - ftol {
                infeasible = true;
                -1.0
            } else if x > up + ftol {
                infeasible = true;
                1.0
            } else {
                0.0
            };
        }
        if !infeasible {
            for (pos, &v) in self.head.iter().enumerate() {
                cb[pos] = match v {
                    Var::Col(j) => self.cost[j as usize],
                    Var::Slack(_) => 0.0,
                };
            }
        }
        infeasible
    }

    /// Reduced cost of a nonbasic variable if it is an improving candidate.
    fn candidate(&self, key: usize, y: &[f64], phase1: bool) -> Option<f64> {
        let v = self.var_of_key(key);
        let (d, x, lo, up) = match v {
            Var::Col(j) => {
                let j = j as usize;
                if self.pos_col[j] != NONBASIC {
                    return None;
                }
                let c = if phase1 { 0.0 } else { self.cost[j] };
                (c - self.dot_col(j, y), self.x_col[j], self.lower[j], self.upper[j])
            }
            Var::Slack(i) => {
                let i = i as usize;
                if self.pos_slack[i] != NONBASIC {
                    return None;
                }
                (-y[i], self.x_slack[i], self.slack_lower[i], self.slack_upper[i])
            }
        };
        let otol = self.tol.optimality;
        if (d < -otol && x < up) || (d > otol && x > lo) {
            Some(d)
        } else {
            None
        }
    }

    fn price(&mut self, y: &[f64], phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let total = self.num_vars() + self.num_rows();
        if bland {
            return (0..total).find_map(|k| self.candidate(k, y, phase1).map(|d| (k, d)));
        }
        let best_in = |s: &Self, range: core::ops::Range<usize>| {
            let mut best: Option<(usize, f64)> = None;
            for k in range {
                if let Some(d) = s.candidate(k, y, phase1) {
                    if best.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                        best = Some((k, d));
                    }
                }
            }
            best
        };
        if total <= PARTIAL_PRICING_ABOVE {
            return best_in(self, 0..total);
        }
        let segments = total.div_ceil(PRICING_SEGMENT);
        for step in 0..segments {
            let seg = (self.cursor + step) % segments;
            let start = seg * PRICING_SEGMENT;
            let end = (start + PRICING_SEGMENT).min(total);
            if let Some(found) = best_in(self, start..end) {
                self.cursor = (seg + 1) % segments;
                return Some(found);
            }
        }
        None
    }

    /// Harris two-pass ratio test along direction `dir` of the entering
    /// variable, whose FTRAN image is `alpha`.
    fn ratio_test(&self, entering: Var, dir: f64, alpha: &[f64], bland: bool) -> (Step, f64) {
        let ftol = self.tol.feasibility;
        let ptol = self.tol.pivot;
        let (elo, eup) = self.bounds_of(entering);
        let flip = eup - elo;
        // (pos, exact ratio, relaxed ratio, target)
        let limit = |pos: usize| -> Option<(f64, f64, f64)> {
            let rate = -dir * alpha[pos];
            if rate.abs() <= ptol {
                return None;
            }
            let v = self.head[pos];
            let (lo, up) = self.bounds_of(v);
            let x = self.value_of(v);
            if rate < 0.0 {
                let target = if x > up + ftol {
                    up
                } else if x >= lo - ftol && lo.is_finite() {
                    lo
                } else {
                    return None;
                };
                let r = -rate;
                Some(((x - target).max(0.0) / r, (x - target + ftol) / r, target))
            } else {
                let target = if x < lo - ftol {
                    lo
                } else if x <= up + ftol && up.is_finite() {
                    up
                } else {
                    return None;
                };
                Some(((target - x).max(0.0) / rate, (target - x + ftol) / rate, target))
            }
        };

        if bland {
            let mut best: Option<(usize, f64, f64)> = None;
            let mut best_key = usize::MAX;
            for pos in 0..alpha.len() {
                if let Some((exact, _, target)) = limit(pos) {
                    let key = self.key_of(self.head[pos]);
                    let better = match best {
                        None => true,
                        Some((_, t, _)) => exact < t || (exact == t && key < best_key),
                    };
                    if better {
                        best = Some((pos, exact, target));
                        best_key = key;
                    }
                }
            }
            return match best {
                Some((_, t, _)) if flip <= t => (Step::Flip, flip),
                Some((pos, theta, target)) => (Step::Pivot { pos, target }, theta),
                None if flip.is_finite() => (Step::Flip, flip),
                None => (Step::Unbounded, f64::INFINITY),
            };
        }

        let mut theta_max = f64::INFINITY;
        for pos in 0..alpha.len() {
            if let Some((_, relaxed, _)) = limit(pos) {
                theta_max = theta_max.min(relaxed);
            }
        }
        if flip.is_finite() && flip <= theta_max {
            return (Step::Flip, flip);
        }
        if theta_max == f64::INFINITY {
            return (Step::Unbounded, f64::INFINITY);
        }
        let mut best: Option<(usize, f64, f64)> = None;
        let mut best_mag = 0.0;
        for pos in 0..alpha.len() {
            if let Some((exact, _, target)) = limit(pos) {
                if exact <= theta_max && alpha[pos].abs() > best_mag {
                    best_mag = alpha[pos].abs();
                    best = Some((pos, exact, target));
                }
            }
        }
        let (pos, theta, target) = best.expect("a row attains the relaxed bound");
        (Step::Pivot { pos, target }, theta)
    }

    fn key_of(&self, v: Var) -> usize {
        match v {
            Var::Col(j) => j as usize,
            Var::Slack(i) => self.num_vars() + i as usize,
        }
    }

    /// Runs the simplex from the current basis.
    pub fn solve(&mut self) -> LpStatus {
        let m = self.num_rows();
        let n = self.num_vars();
        self.iterations = 0;
        self.y.resize(m, 0.0);
        let cap = self.max_iterations.unwrap_or(50_000 + 50 * (m + n));
        if self.lu.is_none() || self.needs_refactor {
            self.refactor();
        } else if self.values_dirty {
            self.recompute_basics();
        }
        let mut cb = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut alpha = vec![0.0; m];
        let mut work = Vec::new();
        let mut degenerate = 0usize;
        let mut bland = false;

        let status = loop {
            if self.iterations >= cap {
                break LpStatus::IterationLimit;
            }
            if self.needs_refactor || self.lu.as_ref().map_or(true, |lu| lu.num_etas() >= REFACTOR_INTERVAL) {
                self.refactor();
            }
            let phase1 = self.basic_costs(&mut cb);
            y.copy_from_slice(&cb);
            self.lu.as_ref().expect("factorized").btran(&mut y, &mut work);

            let Some((key, d)) = self.price(&y, phase1, bland) else {
                if self.lu.as_ref().map_or(0, |lu| lu.num_etas()) > 0 {
                    self.needs_refactor = true;
                    continue;
                }
                break if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            let entering = self.var_of_key(key);
            let dir = if d < 0.0 { 1.0 } else { -1.0 };
            self.scatter(entering, &mut alpha);
            self.lu.as_ref().expect("factorized").ftran(&mut alpha, &mut work);

            let (mut step, mut theta) = self.ratio_test(entering, dir, &alpha, bland);
            if let Step::Unbounded = step {
                if self.lu.as_ref().map_or(0, |lu| lu.num_etas()) > 0 {
                    // Confirm the ray on a fresh factorization.
                    self.refactor();
                    self.scatter(entering, &mut alpha);
                    self.lu.as_ref().expect("factorized").ftran(&mut alpha, &mut work);
                    (step, theta) = self.ratio_test(entering, dir, &alpha, bland);
                }
                if let Step::Unbounded = step {
                    break if phase1 { LpStatus::IterationLimit } else { LpStatus::Unbounded };
                }
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                degenerate += 1;
                if degenerate > BLAND_AFTER {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            let delta = dir * theta;
            if delta != 0.0 {
                for pos in 0..m {
                    if alpha[pos] != 0.0 {
                        let v = self.head[pos];
                        let x = self.value_of(v);
                        self.set_value(v, x - delta * alpha[pos]);
                    }
                }
            }
            let x_in = self.value_of(entering);
            match step {
                Step::Flip => {
                    let (lo, up) = self.bounds_of(entering);
                    self.set_value(entering, if dir > 0.0 { up } else { lo });
                }
                Step::Pivot { pos, target, .. } => {
                    let leaving = self.head[pos];
                    self.set_value(leaving, target);
                    self.set_pos(leaving, NONBASIC);
                    self.set_value(entering, x_in + delta);
                    self.set_pos(entering, pos as u32);
                    self.head[pos] = entering;
                    let piv = alpha[pos].abs();
                    let scale = alpha.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                    self.lu.as_mut().expect("factorized").push_eta(pos, &alpha);
                    if piv < 1e-7 * scale.max(1.0) {
                        self.needs_refactor = true;
                    }
                }
                Step::Unbounded => unreachable!(),
            }
        };

        self.status = status;
        if status == LpStatus::Optimal {
            self.y.copy_from_slice(&y);
        }
        status
    }
}
