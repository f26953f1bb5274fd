//! Dense linear programs: model, bounded two-phase simplex, and epigraph helpers.

mod dump;
mod pwl;
mod simplex;

pub use dump::write_lp;
pub use pwl::{encode_pwl_utility, PiecewiseLinearConcave};
pub use simplex::{solve_lp, solve_lp_with, Pricing, SolverOptions, Tolerances};

use crate::error::LpError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Variable<T> {
    pub name: String,
    pub lower: T,
    pub upper: T,
}

#[derive(Debug, Clone)]
pub struct Constraint<T> {
    pub terms: Vec<(VarId, T)>,
    pub relation: Relation,
    pub rhs: T,
}

impl<T: Scalar> Constraint<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let lhs = self.activity(x);
        let z = T::zero();
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(z),
            Relation::Ge => (self.rhs - lhs).max(z),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// Minimization problem `min c·x` subject to linear rows and variable bounds.
///
/// Rows are stored sparsely; a missing entry is a zero coefficient, so every
/// row implicitly spans all variables.
#[derive(Debug, Clone, Default)]
pub struct LinearProgram<T> {
    vars: Vec<Variable<T>>,
    objective: Vec<T>,
    constraints: Vec<Constraint<T>>,
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new() -> Self {
        Self { vars: Vec::new(), objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: T, upper: T) -> VarId {
        self.vars.push(Variable { name: name.into(), lower, upper });
        self.objective.push(T::zero());
        VarId(self.vars.len() - 1)
    }

    /// Non-negative variable with an optional upper bound.
    pub fn add_nonneg(&mut self, name: impl Into<String>, upper: Option<T>) -> VarId {
        self.add_var(name, T::zero(), upper.unwrap_or_else(T::infinity))
    }

    pub fn set_objective(&mut self, var: VarId, coef: T) {
        self.objective[var.0] = coef;
    }

    pub fn add_objective(&mut self, var: VarId, coef: T) {
        self.objective[var.0] = self.objective[var.0] + coef;
    }

    pub fn add_constraint(&mut self, terms: Vec<(VarId, T)>, relation: Relation, rhs: T) -> RowId {
        self.constraints.push(Constraint { terms, relation, rhs });
        RowId(self.constraints.len() - 1)
    }

    pub fn set_upper(&mut self, var: VarId, upper: T) {
        self.vars[var.0].upper = upper;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn vars(&self) -> &[Variable<T>] {
        &self.vars
    }

    pub fn var(&self, id: VarId) -> &Variable<T> {
        &self.vars[id.0]
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint<T>] {
        &self.constraints
    }

    pub fn constraint(&self, id: RowId) -> &Constraint<T> {
        &self.constraints[id.0]
    }

    /// Dense copy of a row, one entry per variable.
    pub fn dense_row(&self, id: RowId) -> Vec<T> {
        let mut row = vec![T::zero(); self.vars.len()];
        for &(v, a) in &self.constraints[id.0].terms {
            row[v.0] = row[v.0] + a;
        }
        row
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Largest absolute violation of any row or bound at `x`.
    pub fn primal_residual(&self, x: &[T]) -> T {
        let z = T::zero();
        let rows = self.constraints.iter().map(|c| c.violation(x)).fold(z, T::max);
        let bounds = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(z))
            .fold(z, T::max);
        rows.max(bounds)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        for (j, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(LpError::Malformed(format!(
                    "variable {j} ({}) has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == T::infinity() || v.upper == T::neg_infinity() {
                return Err(LpError::Malformed(format!("variable {j} has an empty domain")));
            }
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::Malformed(format!("objective coefficient {j} is not finite")));
        }
        let n = self.vars.len();
        for (i, c) in self.constraints.iter().enumerate() {
            if !c.rhs.is_finite() {
                return Err(LpError::Malformed(format!("row {i} has a non-finite rhs")));
            }
            for &(v, a) in &c.terms {
                if v.0 >= n {
                    return Err(LpError::Malformed(format!(
                        "row {i} references variable {} of {n}",
                        v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::Malformed(format!("row {i} has a non-finite coefficient")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    /// Primal point; empty unless optimal.
    pub primal: Vec<T>,
    pub objective: T,
    /// One multiplier per row, with `c - Aᵀy` the reduced costs. `≤` rows get
    /// `y ≤ 0`, `≥` rows `y ≥ 0`.
    pub duals: Vec<T>,
    pub iterations: usize,
}

impl<T: Scalar> LpSolution<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, var: VarId) -> T {
        self.primal[var.0]
    }

    /// Reduced costs `c - Aᵀy` for every variable.
    pub fn reduced_costs(&self, lp: &LinearProgram<T>) -> Vec<T> {
        let mut d = lp.objective.clone();
        for (c, &y) in lp.constraints.iter().zip(&self.duals) {
            for &(v, a) in &c.terms {
                d[v.0] = d[v.0] - a * y;
            }
        }
        d
    }

    /// Objective of the dual problem built from the row multipliers and the
    /// bound multipliers implied by the reduced costs.
    pub fn dual_objective(&self, lp: &LinearProgram<T>) -> T {
        let z = T::zero();
        let rows: T = lp.constraints.iter().zip(&self.duals).map(|(c, &y)| c.rhs * y).sum();
        let bounds: T = self
            .reduced_costs(lp)
            .iter()
            .zip(&lp.vars)
            .map(|(&d, v)| {
                if d > z && v.lower.is_finite() {
                    d * v.lower
                } else if d < z && v.upper.is_finite() {
                    d * v.upper
                } else {
                    z
                }
            })
            .sum();
        rows + bounds
    }

    /// Worst complementary-slackness product over rows and bounds.
    pub fn complementarity_residual(&self, lp: &LinearProgram<T>) -> T {
        let z = T::zero();
        let rows = lp
            .constraints
            .iter()
            .zip(&self.duals)
            .map(|(c, &y)| (y * (c.activity(&self.primal) - c.rhs)).abs())
            .fold(z, T::max);
        let bounds = self
            .reduced_costs(lp)
            .iter()
            .zip(&lp.vars)
            .zip(&self.primal)
            .map(|((&d, v), &x)| {
                if d > z {
                    if v.lower.is_finite() {
                        d * (x - v.lower)
                    } else {
                        d.abs()
                    }
                } else if d < z {
                    if v.upper.is_finite() {
                        -d * (v.upper - x)
                    } else {
                        d.abs()
                    }
                } else {
                    z
                }
            })
            .fold(z, T::max);
        rows.max(bounds)
    }
}
