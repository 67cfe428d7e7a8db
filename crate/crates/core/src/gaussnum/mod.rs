//! Exact Gaussian numerics for sequential tests.
//!
//! The sequential z statistic `S_k` has a Markov structure on the
//! cumulative-sum scale `B_k = sqrt(n_{1:k}) * S_k`: increments across
//! stages are independent Gaussians with variance equal to the stage size.
//! [`sequential_probs`] exploits that with a stagewise density recursion
//! over per-stage grids, giving noncrossing and first-crossing
//! probabilities for arbitrary per-stage continuation intervals.
//!
//! On top of the recursion sit the classical alpha-spending schedules
//! ([`spending_alpha`]) and a bisection solver that turns a spending
//! schedule into stage cutoffs ([`boundaries_from_spending`]).

mod normal;
mod recursion;
mod spending;

pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};
pub use recursion::{sequential_probs, RecursionGrid, SequentialProbs, StageRegions};
pub use spending::{
    alpha_budget_curve, boundaries_from_schedule, boundaries_from_spending, spending_alpha,
    BoundaryResult, SpendingKind,
};
