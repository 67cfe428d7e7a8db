//! Simulation of sequential test-statistic paths.
//!
//! Paths are the raw material of the sample-average design problem: a
//! matrix of statistic values `S^m_k` for paths `m = 1..M` and stages
//! `k = 1..K`, generated under the null, the alternative, or a scaled
//! alternative. Streams are counter-based: each path derives its generator
//! from `(seed, stream class, hypothesis, path index)`, so parallel
//! generation is bit-identical to sequential and null/alternative draws
//! never overlap. Evaluation streams are namespaced away from training
//! streams so fresh Monte Carlo checks never reuse design paths.

mod paths;
mod rng;
mod spec;

pub use paths::{
    dump_paths_csv, generate_custom_paths, generate_paths, generate_t_paths,
    generate_t_paths_with_raw, generate_two_prop_paths, generate_z_paths, PathMatrix,
};
pub use rng::{PathRng, StreamClass};
pub use spec::{
    estimate_pilot_sigma, make_schedule, DesignSpec, Hypothesis, PilotSample, Sidedness,
    TestFamily,
};
