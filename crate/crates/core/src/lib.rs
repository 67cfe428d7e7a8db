//! Design toolkit for group sequential hypothesis tests.
//!
//! A group sequential test monitors a trial at interim analyses `k = 1..K`
//! with cumulative sample sizes `n_{1:k}` and rejects the null the first
//! time the test statistic `S_k` crosses a stage cutoff. This crate covers
//! the full design workflow:
//!
//! * [`sampling`] simulates sequential test-statistic paths (z, t, pilot-t,
//!   two-proportion, or custom statistics) under the null and alternative.
//! * [`gaussnum`] provides exact Gaussian numerics: stagewise crossing
//!   probabilities by density recursion, alpha-spending functions, and
//!   spending-matched boundary solving.
//! * [`milp`] is a self-contained mixed-integer linear programming engine:
//!   a bounded-variable simplex and a deterministic branch-and-bound search.
//! * [`smilp`] compiles a sample-average approximation of the optimal
//!   design problem into a MILP and solves it for expected-sample-size
//!   optimal cutoffs under a type-1 (and optionally type-2) constraint.
//! * [`evaluate`] computes exact and Monte Carlo operating characteristics
//!   and compares optimized designs against alpha-spending benchmarks.
//! * [`replay`] runs designed boundaries over recorded trial outcomes,
//!   including permutation studies of sample-size consumption.
//!
//! The command line in `src/main.rs` wires these together behind config
//! files; see the crate README for usage.

pub mod cli;
pub mod error;
pub mod evaluate;
pub mod gaussnum;
pub mod milp;
pub mod replay;
pub mod sampling;
pub mod smilp;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
