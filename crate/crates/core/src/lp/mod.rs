//! Linear programming engine.
//!
//! A bounded-variable revised simplex over sparse columns with an LU
//! factorized basis and product-form updates. It is the substrate for the
//! restricted master problem, the equal-profit-method model, the network
//! flow relaxation and the restricted integer finisher.
//!
//! Dual sign convention (minimization): a `<=` row has a dual `<= 0`, a `>=`
//! row a dual `>= 0`, and an equality row a free dual. Duals are the
//! sensitivity of the optimal objective to the row right-hand side.

mod bnb;
mod lu;
mod mps;
mod simplex;

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

pub use bnb::{branch_and_bound_binary, BnbOptions, BnbOutcome, BnbStatus};
pub use simplex::{Basis, Simplex, VarStatus};

/// Numerical tolerances shared by every solve in the crate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Primal bound/row violation still considered feasible.
    pub feasibility: f64,
    /// Reduced cost magnitude below which a column is not attractive.
    pub optimality: f64,
    /// Distance from 0/1 still considered integral.
    pub integrality: f64,
    /// Smallest pivot element accepted in the ratio test.
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            optimality: 1e-6,
            integrality: 1e-6,
            pivot: 1e-9,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// One constraint row `coeffs · x (sense) rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min c·x` subject to rows and variable bounds.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LpError {
    #[error("row {row} references variable {var} but the program has {num_vars} variables")]
    VariableOutOfRange { row: usize, var: usize, num_vars: usize },
    #[error("non-finite coefficient in row {row}")]
    NonFiniteCoefficient { row: usize },
    #[error("variable {var} has lower bound {lower} above upper bound {upper}")]
    InconsistentBounds { var: usize, lower: f64, upper: f64 },
    #[error("variable {var} has a non-finite objective coefficient")]
    NonFiniteCost { var: usize },
    #[error("row {row} has a non-finite right-hand side")]
    NonFiniteRhs { row: usize },
    #[error("objective, lower and upper vectors differ in length")]
    ShapeMismatch,
    #[error("warm-start basis does not match the program dimensions")]
    BasisMismatch,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_variable(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::ShapeMismatch);
        }
        for (var, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFiniteCost { var });
            }
            let (lower, upper) = (self.lower[var], self.upper[var]);
            if lower.is_nan() || upper.is_nan() || lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
                return Err(LpError::InconsistentBounds { var, lower, upper });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFiniteRhs { row: r });
            }
            for &(var, a) in &row.coeffs {
                if var >= n {
                    return Err(LpError::VariableOutOfRange { row: r, var, num_vars: n });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFiniteCoefficient { row: r });
                }
            }
        }
        Ok(())
    }

    /// Row activities `A x` for a candidate point.
    pub fn activities(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Largest bound or row violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (row, act) in self.rows.iter().zip(self.activities(x)) {
            let viol = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Fixed-format MPS text for inspection with external tools.
    pub fn to_mps(&self, name: &str) -> alloc::string::String {
        mps::write_mps(self, name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub primal: Vec<f64>,
    /// One dual per row, see the module docs for the sign convention.
    pub duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    /// Dual objective `b·y + Σ_j d_j x_j`, where the second sum collects the
    /// bound multipliers of nonbasic variables sitting at a finite bound.
    pub fn dual_objective(&self, program: &LinearProgram) -> f64 {
        let by: f64 = program.rows.iter().zip(&self.duals).map(|(r, y)| r.rhs * y).sum();
        let bounds: f64 = self
            .reduced_costs
            .iter()
            .zip(&self.primal)
            .map(|(d, x)| d * x)
            .sum();
        by + bounds
    }
}

/// One-shot solve of a program, optionally warm-started from a basis
/// returned by an earlier solve of a program with the same dimensions.
pub fn lp_solve(program: &LinearProgram, warm: Option<&Basis>) -> Result<(LpSolution, Basis), LpError> {
    program.validate()?;
    let mut simplex = Simplex::from_program(program, Tolerances::default());
    if let Some(basis) = warm {
        simplex.set_basis(basis)?;
    }
    simplex.solve();
    let solution = simplex.solution();
    Ok((solution, simplex.basis()))
}

/// Operations the column generation and search layers need from an LP
/// solver. [`Simplex`] is the reference implementation.
pub trait LpBackend {
    fn num_vars(&self) -> usize;
    fn num_rows(&self) -> usize;
    fn add_column(&mut self, cost: f64, lower: f64, upper: f64, entries: &[(usize, f64)]) -> usize;
    fn add_row(&mut self, entries: &[(usize, f64)], sense: Sense, rhs: f64) -> usize;
    fn set_bounds(&mut self, var: usize, lower: f64, upper: f64);
    fn set_rhs(&mut self, row: usize, rhs: f64);
    fn solve(&mut self) -> LpStatus;
    fn objective(&self) -> f64;
    fn primal(&self, var: usize) -> f64;
    fn dual(&self, row: usize) -> f64;
}

impl LpBackend for Simplex {
    fn num_vars(&self) -> usize {
        Simplex::num_vars(self)
    }
    fn num_rows(&self) -> usize {
        Simplex::num_rows(self)
    }
    fn add_column(&mut self, cost: f64, lower: f64, upper: f64, entries: &[(usize, f64)]) -> usize {
        Simplex::add_column(self, cost, lower, upper, entries)
    }
    fn add_row(&mut self, entries: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        Simplex::add_row(self, entries, sense, rhs)
    }
    fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        Simplex::set_bounds(self, var, lower, upper)
    }
    fn set_rhs(&mut self, row: usize, rhs: f64) {
        Simplex::set_rhs(self, row, rhs)
    }
    fn solve(&mut self) -> LpStatus {
        Simplex::solve(self)
    }
    fn objective(&self) -> f64 {
        Simplex::objective(self)
    }
    fn primal(&self, var: usize) -> f64 {
        Simplex::value(self, var)
    }
    fn dual(&self, row: usize) -> f64 {
        Simplex::dual(self, row)
    }
}
