//! Public LP interface: solve a model's continuous relaxation.

use crate::error::Error;
use crate::Result;

use super::model::MilpModel;
use super::simplex::{LpOutcome, Simplex, TickBudget};

/// Status of an LP relaxation solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution of an LP relaxation.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective value including the model offset; meaningful only when
    /// status is Optimal.
    pub value: f64,
    /// Assignment of the structural variables (empty unless Optimal).
    pub x: Vec<f64>,
    /// Dual prices, one per constraint row (empty unless Optimal).
    pub duals: Vec<f64>,
    /// Simplex pivots performed.
    pub iterations: u64,
}

/// Solve the continuous relaxation of `model` (integrality dropped,
/// bounds kept) with the bounded-variable simplex.
pub fn lp_solve(model: &MilpModel) -> Result<LpSolution> {
    model.validate()?;
    let mut s = Simplex::new();
    let n = model.num_vars();
    let mut cost = vec![0.0; n];
    for &(j, c) in &model.objective {
        cost[j] = c;
    }
    for (j, v) in model.variables.iter().enumerate() {
        s.add_structural(Vec::new(), cost[j], v.lb, v.ub, false);
    }
    for con in &model.constraints {
        s.add_row(&con.coeffs, con.sense, con.rhs);
    }
    let mut budget = TickBudget::unlimited();
    let out = s.primal_solve(&mut budget)?;
    match out {
        LpOutcome::Optimal => {
            let resid = s.feasibility_residual();
            if resid > 1e-7 {
                return Err(Error::Numerical(format!(
                    "LP solve ended with feasibility residual {resid:.3e}"
                )));
            }
            let x: Vec<f64> = (0..n).map(|j| s.x[j]).collect();
            let value = model.objective_value(&x);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                value,
                duals: s.duals(),
                x,
                iterations: s.pivot_count,
            })
        }
        LpOutcome::Infeasible => Ok(LpSolution {
            status: LpStatus::Infeasible,
            value: f64::NAN,
            x: Vec::new(),
            duals: Vec::new(),
            iterations: s.pivot_count,
        }),
        LpOutcome::Unbounded => Ok(LpSolution {
            status: LpStatus::Unbounded,
            value: f64::NEG_INFINITY,
            x: Vec::new(),
            duals: Vec::new(),
            iterations: s.pivot_count,
        }),
        LpOutcome::Aborted => unreachable!("unlimited budget cannot abort"),
    }
}
