//! Mixed-integer linear model representation.
//!
//! Minimization-only: `minimize c'x + offset` subject to sparse rows
//! `a'x {<=,>=,=} rhs` and variable bounds. Binary variables are bounded
//! within [0,1]; everything else is continuous with arbitrary (possibly
//! infinite) bounds.

use std::collections::HashSet;

use crate::error::Error;
use crate::Result;

/// Variable integrality marker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

/// Row sense.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

/// A decision variable: name, bounds, integrality.
#[derive(Debug, Clone)]
pub struct Variable {
    pub name: String,
    pub lb: f64,
    pub ub: f64,
    pub kind: VarKind,
}

/// A sparse constraint row. Coefficients are (variable index, value),
/// kept sorted by index with no duplicates.
#[derive(Debug, Clone)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// A minimization MILP.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub name: String,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Sparse objective coefficients, sorted by variable index.
    pub objective: Vec<(usize, f64)>,
    /// Constant added to the objective value.
    pub objective_offset: f64,
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        MilpModel {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables
            .iter()
            .filter(|v| v.kind == VarKind::Binary)
            .count()
    }

    /// Add a continuous variable, returning its index.
    pub fn add_continuous(&mut self, name: impl Into<String>, lb: f64, ub: f64) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lb,
            ub,
            kind: VarKind::Continuous,
        });
        self.variables.len() - 1
    }

    /// Add a binary variable, returning its index.
    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            lb: 0.0,
            ub: 1.0,
            kind: VarKind::Binary,
        });
        self.variables.len() - 1
    }

    /// Add a constraint row. Coefficients are sorted and merged here so
    /// callers may pass terms in any order.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        sense: Sense,
        rhs: f64,
    ) {
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|&(j, _)| j);
        coeffs.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        coeffs.retain(|&(_, c)| c != 0.0);
        self.constraints.push(Constraint {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
    }

    /// Set the sparse objective (terms merged and sorted) and offset.
    pub fn set_objective(&mut self, coeffs: Vec<(usize, f64)>, offset: f64) {
        let mut coeffs = coeffs;
        coeffs.sort_by_key(|&(j, _)| j);
        coeffs.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 += a.1;
                true
            } else {
                false
            }
        });
        coeffs.retain(|&(_, c)| c != 0.0);
        self.objective = coeffs;
        self.objective_offset = offset;
    }

    /// Structural well-formedness: index ranges, finite coefficients,
    /// consistent bounds, binaries within [0,1], unique names.
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        let mut names = HashSet::with_capacity(n);
        for (j, v) in self.variables.iter().enumerate() {
            if v.name.is_empty() || !names.insert(v.name.as_str()) {
                return Err(Error::validation(format!(
                    "variable {j} has empty or duplicate name {:?}",
                    v.name
                )));
            }
            if v.lb.is_nan() || v.ub.is_nan() || v.lb > v.ub {
                return Err(Error::validation(format!(
                    "variable {} has inconsistent bounds [{}, {}]",
                    v.name, v.lb, v.ub
                )));
            }
            if v.kind == VarKind::Binary && (v.lb < 0.0 || v.ub > 1.0) {
                return Err(Error::validation(format!(
                    "binary variable {} has bounds outside [0,1]",
                    v.name
                )));
            }
        }
        for con in &self.constraints {
            if !con.rhs.is_finite() {
                return Err(Error::validation(format!(
                    "constraint {} has non-finite rhs",
                    con.name
                )));
            }
            for &(j, c) in &con.coeffs {
                if j >= n {
                    return Err(Error::validation(format!(
                        "constraint {} references variable index {j} out of range",
                        con.name
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::validation(format!(
                        "constraint {} has non-finite coefficient on variable {j}",
                        con.name
                    )));
                }
            }
        }
        for &(j, c) in &self.objective {
            if j >= n || !c.is_finite() {
                return Err(Error::validation(format!(
                    "objective references variable {j} with coefficient {c}"
                )));
            }
        }
        if !self.objective_offset.is_finite() {
            return Err(Error::validation("objective offset is not finite"));
        }
        Ok(())
    }

    /// Objective value of an assignment, accumulated in ascending variable
    /// index order. This is the canonical evaluation order used everywhere
    /// a MILP objective is reported, so equal assignments produce
    /// bit-equal values.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let mut v = self.objective_offset;
        for &(j, c) in &self.objective {
            v += c * x[j];
        }
        v
    }

    /// Largest constraint violation and bound violation of an assignment.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &xj) in self.variables.iter().zip(x) {
            worst = worst.max(v.lb - xj).max(xj - v.ub);
        }
        for con in &self.constraints {
            let act: f64 = con.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            let viol = match con.sense {
                Sense::Le => act - con.rhs,
                Sense::Ge => con.rhs - act,
                Sense::Eq => (act - con.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    /// Whether an assignment is feasible within `tol` and integral on the
    /// binaries within `int_tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64, int_tol: f64) -> bool {
        if x.len() != self.variables.len() || self.max_violation(x) > tol {
            return false;
        }
        self.variables
            .iter()
            .zip(x)
            .all(|(v, &xj)| v.kind == VarKind::Continuous || (xj - xj.round()).abs() <= int_tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> MilpModel {
        let mut m = MilpModel::new("toy");
        let x = m.add_continuous("x", 0.0, 2.0);
        let b = m.add_binary("b");
        m.add_constraint("r0", vec![(x, 1.0), (b, 3.0)], Sense::Le, 4.0);
        m.set_objective(vec![(x, 1.0), (b, -2.0)], 0.5);
        m
    }

    #[test]
    fn builder_produces_wellformed_model() {
        let m = toy();
        m.validate().unwrap();
        assert_eq!(m.num_vars(), 2);
        assert_eq!(m.num_binaries(), 1);
        assert_eq!(m.num_constraints(), 1);
    }

    #[test]
    fn objective_accumulates_in_index_order() {
        let mut m = MilpModel::new("order");
        let a = m.add_continuous("a", 0.0, 1.0);
        let b = m.add_continuous("b", 0.0, 1.0);
        let c = m.add_continuous("c", 0.0, 1.0);
        // Deliberately supplied out of order; must evaluate as
        // ((offset + c_a x_a) + c_b x_b) + c_c x_c.
        m.set_objective(vec![(c, 0.3), (a, 0.1), (b, 0.7)], 1.0);
        let x = [0.1, 0.2, 0.3];
        let want = ((1.0 + 0.1 * 0.1) + 0.7 * 0.2) + 0.3 * 0.3;
        assert_eq!(m.objective_value(&x), want);
    }

    #[test]
    fn duplicate_terms_are_merged() {
        let mut m = MilpModel::new("dup");
        let x = m.add_continuous("x", 0.0, 1.0);
        m.add_constraint("r", vec![(x, 1.0), (x, 2.0)], Sense::Le, 1.0);
        assert_eq!(m.constraints[0].coeffs, vec![(x, 3.0)]);
    }

    #[test]
    fn validation_rejects_defects() {
        let mut m = toy();
        m.variables[1].ub = 2.0; // binary outside [0,1]
        assert!(m.validate().is_err());

        let mut m = toy();
        m.variables[0].name = "b".into(); // duplicate name
        assert!(m.validate().is_err());

        let mut m = toy();
        m.constraints[0].coeffs[0].0 = 99; // out of range index
        assert!(m.validate().is_err());

        let mut m = toy();
        m.constraints[0].rhs = f64::NAN;
        assert!(m.validate().is_err());
    }

    #[test]
    fn feasibility_check_covers_rows_bounds_integrality() {
        let m = toy();
        assert!(m.is_feasible(&[1.0, 1.0], 1e-9, 1e-6));
        assert!(!m.is_feasible(&[2.0, 1.0], 1e-9, 1e-6)); // row violated
        assert!(!m.is_feasible(&[-0.1, 0.0], 1e-9, 1e-6)); // bound violated
        assert!(!m.is_feasible(&[0.0, 0.4], 1e-9, 1e-6)); // fractional binary
        assert!(m.is_feasible(&[0.0, 0.4], 1e-9, 0.5)); // loose int tol
    }
}
