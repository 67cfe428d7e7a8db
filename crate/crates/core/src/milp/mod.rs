//! Mixed-integer linear programming.
//!
//! A self-contained MILP toolkit sized for design problems with a few
//! thousand rows and columns:
//!
//! - [`model`]: sparse model container ([`MilpModel`]) with a canonical
//!   objective evaluation order, so every code path that prices an
//!   assignment gets bit-identical values.
//! - [`lp`]: continuous relaxation solver ([`lp_solve`]) on a revised
//!   bounded-variable simplex with explicit basis inverse.
//! - [`bnb`]: deterministic branch-and-bound ([`solve_bnb`]) with
//!   best-bound node selection, lazy row activation, warm starts, and an
//!   optional rounding callback.
//! - [`lptext`]: LP-format text writer/parser with bit-exact round trips.
//!
//! Everything is deterministic: effort limits are expressed in work
//! ticks derived from iteration counts, never wall time, so identical
//! inputs yield identical solver trajectories.

pub mod bnb;
pub mod lp;
pub mod lptext;
pub mod model;
mod simplex;

pub use bnb::{solve_bnb, solve_bnb_with_rounding, BnbParams, MilpSolution, MilpStatus};
pub use lp::{lp_solve, LpSolution, LpStatus};
pub use lptext::{export_lp_text, parse_lp_text};
pub use model::{Constraint, MilpModel, Sense, VarKind, Variable};
