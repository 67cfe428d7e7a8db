//! Optimal group-sequential designs by sample-average approximation.
//!
//! The exact design problem picks stage cutoffs minimizing the expected
//! sample size under the alternative, subject to type-1 and type-2
//! budgets. Replacing each probability with its frequency over `M`
//! simulated statistic paths makes the problem finite: the budget
//! constraints count indicator events per path, and the objective
//! charges each stage's size against the empirical continuation
//! frequency. That counting problem compiles exactly into a
//! mixed-integer linear program — one binary per path event, big-M rows
//! tying each binary to its cutoff comparison — which the bundled
//! branch-and-bound solver handles.
//!
//! The module covers the whole workflow plus its audit machinery:
//!
//! - [`problem`]: the sample-average problem, cutoff vectors, and the
//!   canonical empirical scoring that every other piece defers to.
//! - [`build`]: compilation into the mixed-integer program (single- and
//!   two-boundary designs), cutoff-box handling, bounds presolve.
//! - [`pipeline`]: end-to-end solves with spending-boundary warm
//!   starts, relaxation rounding, and post-solve cutoff repair.
//! - [`oracle`]: brute-force enumeration of tiny instances, used to
//!   certify the compilation end to end.
//! - [`bounds`]: finite-sample accuracy radii and the confidence
//!   interval for the exact optimal expected sample size.

pub mod bounds;
pub mod build;
pub mod oracle;
pub mod pipeline;
pub mod problem;

pub use bounds::{
    gaussian_defaults, saa_epsilon, saa_epsilon1, saa_epsilon_f, saa_value_interval,
    DensityBounds, SaaEpsilons, ValueInterval,
};
pub use build::{
    build_standard_milp, build_symmetric_milp, default_theta_box, effective_box, BuildOptions,
    DesignMilp, MilpLayout, PresolveStats, StandardLayout, SymmetricLayout,
};
pub use oracle::{enumerate_oracle, OracleOutcome};
pub use pipeline::{
    solve_design, solve_problem, solve_symmetric_design, DesignOutcome, SolverParams,
};
pub use problem::{
    empirical_accept_alt, empirical_accept_null, empirical_objective, first_exit_masses,
    meets_budgets, CutoffVector, ExitMasses, SaaProblem,
};
