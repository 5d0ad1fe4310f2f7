//! Small dense linear programs: a model type, a two-phase simplex solver, an
//! exhaustive vertex-enumeration oracle and the estimation programs built on
//! top of them.

mod programs;
mod simplex;
mod vertex;

pub use programs::{
    build_bit_error_lp, build_refined_error_lp, build_refined_yield_lp, build_yield_lp, key_opp_split,
    DecoyCoinInputs, KeyOppSplit, RefinedErrorInputs, RefinedYieldInputs, TauFidelities,
};
pub use simplex::solve_lp;
pub use vertex::solve_by_vertex_enumeration;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Feasibility tolerance applied to every constraint of an optimal solution.
pub const FEAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    /// Point at which the program's linearized constraints were taken, when
    /// the variable has one.
    #[serde(default)]
    pub reference: Option<f64>,
}

/// `Σ coef·x  (≤ | ≥ | =)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let l = self.lhs(x);
        match self.relation {
            Relation::Le => (l - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - l).max(0.0),
            Relation::Eq => (l - self.rhs).abs(),
        }
    }
}

/// A linear program over box-bounded variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub name: String,
    pub vars: Vec<Variable>,
    pub sense: Sense,
    pub objective: Vec<(usize, f64)>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new(name: impl Into<String>, sense: Sense) -> Self {
        LinearProgram { name: name.into(), vars: Vec::new(), sense, objective: Vec::new(), constraints: Vec::new() }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.vars.push(Variable { name: name.into(), lower, upper, reference: None });
        self.vars.len() - 1
    }

    /// Variable in `[0, 1]`, the range of every probability in the programs.
    pub fn add_unit_var(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, 0.0, 1.0)
    }

    /// Unit variable carrying its linearization point.
    pub fn add_unit_var_at(&mut self, name: impl Into<String>, reference: f64) -> usize {
        let j = self.add_unit_var(name);
        self.vars[j].reference = Some(reference);
        j
    }

    pub fn add_constraint(&mut self, label: impl Into<String>, terms: Vec<(usize, f64)>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint { label: label.into(), terms, relation, rhs });
    }

    pub fn set_objective(&mut self, terms: Vec<(usize, f64)>) {
        self.objective = terms;
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// The linearization points of all variables, if every variable has one.
    pub fn reference_point(&self) -> Option<Vec<f64>> {
        self.vars.iter().map(|v| v.reference).collect()
    }

    /// Largest constraint or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let c = self.constraints.iter().map(|k| k.violation(x)).fold(0.0, f64::max);
        let b = self
            .vars
            .iter()
            .zip(x)
            .map(|(v, &xi)| (v.lower - xi).max(xi - v.upper).max(0.0))
            .fold(0.0, f64::max);
        c.max(b)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vars.len();
        for v in &self.vars {
            if !(v.lower.is_finite() && v.upper.is_finite() && v.lower <= v.upper) {
                return Err(Error::InvalidInput(format!(
                    "variable {} of `{}` has invalid bounds [{}, {}]",
                    v.name, self.name, v.lower, v.upper
                )));
            }
        }
        let refs = self.objective.iter().chain(self.constraints.iter().flat_map(|c| c.terms.iter()));
        for &(j, a) in refs {
            if j >= n {
                return Err(Error::InvalidInput(format!("`{}` references undeclared variable {j}", self.name)));
            }
            if !a.is_finite() {
                return Err(Error::InvalidInput(format!("`{}` has a non-finite coefficient", self.name)));
            }
        }
        if let Some(c) = self.constraints.iter().find(|c| !c.rhs.is_finite()) {
            return Err(Error::InvalidInput(format!("constraint {} of `{}` has a non-finite bound", c.label, self.name)));
        }
        Ok(())
    }

    pub fn solve(&self) -> Result<LpSolution> {
        solve_lp(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

impl fmt::Display for LpStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
            LpStatus::Unbounded => "unbounded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
    /// Simplex pivots summed over all independent blocks.
    pub pivots: usize,
}

impl LpSolution {
    /// The optimum, or [`Error::LpFailed`] for any other status.
    pub fn optimum(&self, name: &str) -> Result<f64> {
        match self.status {
            LpStatus::Optimal => Ok(self.objective),
            s => Err(Error::LpFailed { name: name.to_string(), status: s.to_string() }),
        }
    }
}
