//! End-to-end design solves: simulate paths, compile, warm-start,
//! branch-and-bound, then repair and audit the returned cutoffs.
//!
//! The warm start seeds the solver with a feasibility-checked boundary
//! from the classical per-stage spending family, evaluated at the
//! empirical type-1 budget, together with the full binary profile that
//! boundary induces on the training paths. The rounding hook turns every
//! node relaxation into a candidate design by snapping its cutoff
//! components and deriving the induced binaries, which gives the search
//! a stream of verified incumbents long before the bound closes.
//!
//! Post-solve, cutoffs are clamped into the interval their binary
//! certificates allow (a solution can sit a solver tolerance away from a
//! sample, which would silently flip that sample's indicator when the
//! design is evaluated exactly), and any cutoff strictly above every
//! relevant sample at its stage is reported canonically as the box
//! ceiling. The audited empirical masses of the repaired design are
//! returned alongside the solver's own account.

use crate::error::Error;
use crate::gaussnum::{boundaries_from_spending, RecursionGrid, SpendingKind};
use crate::milp::{solve_bnb, solve_bnb_with_rounding, BnbParams, MilpSolution, MilpStatus};
use crate::sampling::{generate_paths, DesignSpec, Hypothesis, StreamClass};
use crate::smilp::build::{
    build_standard_milp, build_symmetric_milp, BuildOptions, DesignMilp, MilpLayout,
};
use crate::smilp::problem::{
    empirical_accept_alt, empirical_accept_null, empirical_objective, meets_budgets,
    CutoffVector, SaaProblem,
};
use crate::Result;

/// Tolerance used by the post-solve empirical feasibility audit. The
/// empirical masses move on a 1/M grid, so any slack below that grid
/// spacing only forgives true rounding noise, never a miscount.
const AUDIT_SLACK: f64 = 1e-9;

/// Knobs for a full design solve.
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Requested threshold box (widened by samples as needed).
    pub theta_box: Option<(f64, f64)>,
    /// Bounds-only presolve for single-boundary programs.
    pub presolve: bool,
    /// Seed the solver with a spending-family boundary when feasible.
    pub warm_start: bool,
    /// Derive candidate designs from node relaxations while searching.
    pub rounding: bool,
    /// Relative/absolute optimality gaps for branch-and-bound.
    pub rel_gap: f64,
    pub abs_gap: f64,
    /// Deterministic work budget and node cap.
    pub tick_limit: u64,
    pub node_limit: u64,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            theta_box: None,
            presolve: true,
            warm_start: true,
            rounding: true,
            rel_gap: 1e-6,
            abs_gap: 1e-9,
            tick_limit: u64::MAX,
            node_limit: u64::MAX,
        }
    }
}

/// Everything a design solve produced, including the audit trail.
#[derive(Debug, Clone)]
pub struct DesignOutcome {
    /// The sample-average problem that was solved.
    pub problem: SaaProblem,
    /// Effective threshold box the program used.
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub widened: bool,
    /// Whether presolve ran on the compiled program.
    pub presolved: bool,
    /// Whether a spending-family warm start seeded the solver.
    pub warm_started: bool,
    /// Raw solver account (status, value, bounds, effort).
    pub solution: MilpSolution,
    /// Repaired stage cutoffs; `None` when the program is infeasible or
    /// the solver stopped without an incumbent.
    pub cutoffs: Option<CutoffVector>,
    /// Stages whose cutoff sat above every relevant sample and was
    /// reported canonically as the box ceiling (0-based).
    pub clamped_stages: Vec<usize>,
    /// Empirical masses of the repaired design on the training paths.
    pub accept_null: Option<f64>,
    pub accept_alt: Option<f64>,
    pub objective_empirical: Option<f64>,
    /// Whether the repaired design meets both budgets on the training
    /// paths (to within [`AUDIT_SLACK`]).
    pub in_sample_ok: Option<bool>,
}

/// Simulate training paths for `spec` and solve the single-boundary
/// design problem.
pub fn solve_design(
    spec: &DesignSpec,
    m_paths: usize,
    seed: u64,
    params: &SolverParams,
) -> Result<DesignOutcome> {
    let null = generate_paths(spec, Hypothesis::Null, m_paths, seed, StreamClass::Train)?;
    let alt = generate_paths(spec, Hypothesis::Alt, m_paths, seed, StreamClass::Train)?;
    let problem = SaaProblem::new(spec.clone(), null, alt, None)?;
    solve_problem(problem, params)
}

/// Simulate training paths for `spec` (including the drift-scaled law)
/// and solve the two-boundary design problem.
pub fn solve_symmetric_design(
    spec: &DesignSpec,
    m_paths: usize,
    seed: u64,
    params: &SolverParams,
) -> Result<DesignOutcome> {
    let null = generate_paths(spec, Hypothesis::Null, m_paths, seed, StreamClass::Train)?;
    let alt = generate_paths(spec, Hypothesis::Alt, m_paths, seed, StreamClass::Train)?;
    let tilde = generate_paths(spec, Hypothesis::Tilde, m_paths, seed, StreamClass::Train)?;
    let problem = SaaProblem::new(spec.clone(), null, alt, Some(tilde))?;
    solve_problem(problem, params)
}

/// Solve an already-assembled design problem.
pub fn solve_problem(problem: SaaProblem, params: &SolverParams) -> Result<DesignOutcome> {
    problem.validate()?;
    let opts = BuildOptions {
        theta_box: params.theta_box,
        presolve: params.presolve,
    };
    let milp = if problem.is_symmetric() {
        build_symmetric_milp(&problem, &opts)?
    } else {
        build_standard_milp(&problem, &opts)?
    };
    let warm = if params.warm_start {
        spending_warm_start(&problem, &milp)
    } else {
        None
    };
    let warm_started = warm.is_some();
    let bnb = BnbParams {
        rel_gap: params.rel_gap,
        abs_gap: params.abs_gap,
        tick_limit: params.tick_limit,
        node_limit: params.node_limit,
        warm_start: warm,
        ..BnbParams::default()
    };
    let solution = if params.rounding {
        solve_bnb_with_rounding(&milp.model, &bnb, |x| {
            round_from_relaxation(&problem, &milp, x)
        })?
    } else {
        solve_bnb(&milp.model, &bnb)?
    };
    finish_outcome(problem, milp, solution, warm_started)
}

/// Clamp a value into a variable's bounds.
fn into_bounds(milp: &DesignMilp, var: usize, v: f64) -> f64 {
    let b = &milp.model.variables[var];
    v.clamp(b.lb, b.ub)
}

/// Classical spending boundary warm start, returned as a full verified
/// assignment, or `None` when no feasible one exists here.
///
/// A boundary with exact size `alpha_tilde` misses the empirical budget
/// about half the time (the empirical mass is binomial noise around the
/// exact level), so progressively more conservative levels are tried
/// until one verifies on the training paths.
fn spending_warm_start(problem: &SaaProblem, milp: &DesignMilp) -> Option<Vec<f64>> {
    for shrink in [1.0, 0.8, 0.5, 0.25] {
        let level = problem.alpha_tilde * shrink;
        if let Some(x) = spending_start_at(problem, milp, level) {
            return Some(x);
        }
    }
    None
}

/// One candidate warm start: the spending boundary at `level`, verified
/// against the empirical budgets with zero slack.
fn spending_start_at(problem: &SaaProblem, milp: &DesignMilp, level: f64) -> Option<Vec<f64>> {
    let spec = &problem.spec;
    let two_sided = spec.sidedness.is_two();
    if !(level > 0.0 && level < 1.0) {
        return None;
    }
    let bracket_lo = if two_sided { 0.0 } else { -2.0 };
    let boundary = boundaries_from_spending(
        &spec.stages_cum(),
        SpendingKind::Pocock,
        level,
        two_sided,
        (bracket_lo, 9.0),
        &RecursionGrid::default(),
    )
    .ok()?;
    let cutoffs = match milp.layout {
        MilpLayout::Standard(lay) => {
            let thresholds = (0..lay.k_stages)
                .map(|k| into_bounds(milp, lay.theta(k), boundary.theta[k]))
                .collect();
            CutoffVector::Standard { thresholds }
        }
        MilpLayout::Symmetric(lay) => {
            let k = lay.k_stages;
            // Reject boundary from the spending family; accept boundary
            // open (at the box floor) until the final stage ties them.
            let mut upper: Vec<f64> = (0..k)
                .map(|j| into_bounds(milp, lay.theta_rej(j), boundary.theta[j]))
                .collect();
            let mut lower: Vec<f64> = (0..k)
                .map(|j| milp.model.variables[lay.theta_acc(j)].lb)
                .collect();
            let tie = into_bounds(milp, lay.theta_acc(k - 1), upper[k - 1]);
            lower[k - 1] = tie;
            upper[k - 1] = tie;
            CutoffVector::Symmetric { lower, upper }
        }
    };
    if !meets_budgets(problem, &cutoffs, 0.0).ok()? {
        return None;
    }
    Some(assignment_from_cutoffs(problem, milp, &cutoffs))
}

/// Derive the full variable assignment a cutoff vector induces on the
/// training paths: cutoffs verbatim, binaries as exact indicators with
/// the program's tie conventions (weak on null paths, strict on
/// alternative and drift-scaled paths).
fn assignment_from_cutoffs(
    problem: &SaaProblem,
    milp: &DesignMilp,
    cutoffs: &CutoffVector,
) -> Vec<f64> {
    let mut x = vec![0.0; milp.model.num_vars()];
    match (&milp.layout, cutoffs) {
        (MilpLayout::Standard(lay), CutoffVector::Standard { thresholds }) => {
            for k in 0..lay.k_stages {
                x[lay.theta(k)] = thresholds[k];
            }
            for m in 0..lay.m_paths {
                let null_row = problem.null_paths.row(m);
                let crossed = null_row
                    .iter()
                    .zip(thresholds)
                    .any(|(&s, &t)| s > t);
                x[lay.cross(m)] = f64::from(u8::from(crossed));
                let alt_row = problem.alt_paths.row(m);
                let mut running = true;
                for k in 0..lay.k_stages {
                    let below = alt_row[k] < thresholds[k];
                    running = running && below;
                    x[lay.cont(m, k)] = f64::from(u8::from(below));
                    x[lay.through(m, k)] = f64::from(u8::from(running));
                }
            }
        }
        (MilpLayout::Symmetric(lay), CutoffVector::Symmetric { lower, upper }) => {
            let tilde = problem
                .tilde_paths
                .as_ref()
                .expect("two-boundary problems carry drift-scaled paths");
            for k in 0..lay.k_stages {
                x[lay.theta_acc(k)] = lower[k];
                x[lay.theta_rej(k)] = upper[k];
            }
            let bit = |b: bool| f64::from(u8::from(b));
            for m in 0..lay.m_paths {
                let null_row = problem.null_paths.row(m);
                let mut inside = true;
                for k in 0..lay.k_stages {
                    let s = null_row[k];
                    let below_rej = s <= upper[k];
                    let above_acc = s >= lower[k];
                    let below_acc = s <= lower[k];
                    x[lay.null_below_rej(m, k)] = bit(below_rej);
                    x[lay.null_above_acc(m, k)] = bit(above_acc);
                    x[lay.null_below_acc(m, k)] = bit(below_acc);
                    x[lay.null_accept(m, k)] = bit(inside && below_acc);
                    inside = inside && below_rej && above_acc;
                }
                let alt_row = problem.alt_paths.row(m);
                let mut inside = true;
                for k in 0..lay.k_stages {
                    let s = alt_row[k];
                    let below_rej = s < upper[k];
                    let above_acc = s > lower[k];
                    let below_acc = s < lower[k];
                    x[lay.alt_below_rej(m, k)] = bit(below_rej);
                    x[lay.alt_above_acc(m, k)] = bit(above_acc);
                    x[lay.alt_below_acc(m, k)] = bit(below_acc);
                    x[lay.alt_accept(m, k)] = bit(inside && below_acc);
                    inside = inside && below_rej && above_acc;
                }
                let tilde_row = tilde.row(m);
                let mut running = true;
                for k in 0..lay.k_stages {
                    let s = tilde_row[k];
                    let below_rej = s < upper[k];
                    let above_acc = s > lower[k];
                    x[lay.tilde_below_rej(m, k)] = bit(below_rej);
                    x[lay.tilde_above_acc(m, k)] = bit(above_acc);
                    running = running && below_rej && above_acc;
                    x[lay.tilde_cont(m, k)] = bit(running);
                }
            }
        }
        _ => unreachable!("layout and cutoff kinds always match here"),
    }
    x
}

/// Rounding hook: snap a relaxation's cutoff components into their
/// bounds and hand back the induced integral assignment.
fn round_from_relaxation(
    problem: &SaaProblem,
    milp: &DesignMilp,
    x: &[f64],
) -> Option<Vec<f64>> {
    let cutoffs = match milp.layout {
        MilpLayout::Standard(lay) => {
            let thresholds = (0..lay.k_stages)
                .map(|k| into_bounds(milp, lay.theta(k), x[lay.theta(k)]))
                .collect();
            CutoffVector::Standard { thresholds }
        }
        MilpLayout::Symmetric(lay) => {
            let k = lay.k_stages;
            let mut upper: Vec<f64> = (0..k)
                .map(|j| into_bounds(milp, lay.theta_rej(j), x[lay.theta_rej(j)]))
                .collect();
            let mut lower: Vec<f64> = (0..k)
                .map(|j| into_bounds(milp, lay.theta_acc(j), x[lay.theta_acc(j)]).min(upper[j]))
                .collect();
            let tie = lower[k - 1];
            upper[k - 1] = tie;
            lower[k - 1] = tie;
            CutoffVector::Symmetric { lower, upper }
        }
    };
    Some(assignment_from_cutoffs(problem, milp, &cutoffs))
}

/// Interpret the solver result: extract cutoffs, repair them into their
/// binary-certificate intervals, canonicalize never-binding stages, and
/// audit the repaired design on the training paths.
fn finish_outcome(
    problem: SaaProblem,
    milp: DesignMilp,
    solution: MilpSolution,
    warm_started: bool,
) -> Result<DesignOutcome> {
    let mut outcome = DesignOutcome {
        theta_lo: milp.theta_lo,
        theta_hi: milp.theta_hi,
        widened: milp.widened,
        presolved: milp.presolve.is_some(),
        warm_started,
        solution,
        cutoffs: None,
        clamped_stages: Vec::new(),
        accept_null: None,
        accept_alt: None,
        objective_empirical: None,
        in_sample_ok: None,
        problem,
    };
    match outcome.solution.status {
        MilpStatus::Unbounded => {
            return Err(Error::numerical(
                "design program reported unbounded, but its objective is bounded below by construction",
            ))
        }
        MilpStatus::Infeasible => return Ok(outcome),
        MilpStatus::Optimal | MilpStatus::TimeLimitIncumbent => {}
    }
    let Some(x) = outcome.solution.assignment.clone() else {
        return Ok(outcome);
    };
    let extracted = milp.extract_cutoffs(&x)?;
    let repaired = repair_cutoffs(&outcome.problem, &milp, &x, extracted);
    let (canonical, clamped_stages) = canonicalize_high_stages(&outcome.problem, &milp, repaired);
    outcome.accept_null = Some(empirical_accept_null(&outcome.problem, &canonical)?);
    outcome.accept_alt = Some(empirical_accept_alt(&outcome.problem, &canonical)?);
    outcome.objective_empirical = Some(empirical_objective(&outcome.problem, &canonical)?);
    outcome.in_sample_ok = Some(meets_budgets(&outcome.problem, &canonical, AUDIT_SLACK)?);
    outcome.clamped_stages = clamped_stages;
    outcome.cutoffs = Some(canonical);
    Ok(outcome)
}

/// Clamp each cutoff into the interval its solution binaries certify.
///
/// A zero crossing binary certifies the cutoff sits at or above that
/// null sample; a zero continue binary certifies it sits at or below
/// that alternative sample. The solver only guarantees these to its
/// feasibility tolerance; snapping to the certificate interval restores
/// them exactly. On the (tolerance-scale) chance the interval is empty,
/// the null-side certificate wins, preserving the type-1 account.
fn repair_cutoffs(
    problem: &SaaProblem,
    milp: &DesignMilp,
    x: &[f64],
    cutoffs: CutoffVector,
) -> CutoffVector {
    match (&milp.layout, cutoffs) {
        (MilpLayout::Standard(lay), CutoffVector::Standard { mut thresholds }) => {
            for k in 0..lay.k_stages {
                let mut floor = milp.model.variables[lay.theta(k)].lb;
                let mut ceil = milp.model.variables[lay.theta(k)].ub;
                for m in 0..lay.m_paths {
                    if x[lay.cross(m)] < 0.5 {
                        floor = floor.max(problem.null_paths.value(m, k));
                    }
                    if x[lay.cont(m, k)] < 0.5 {
                        ceil = ceil.min(problem.alt_paths.value(m, k));
                    }
                }
                thresholds[k] = if ceil < floor {
                    floor
                } else {
                    thresholds[k].clamp(floor, ceil)
                };
            }
            CutoffVector::Standard { thresholds }
        }
        (MilpLayout::Symmetric(lay), CutoffVector::Symmetric { mut lower, mut upper }) => {
            let tilde = problem
                .tilde_paths
                .as_ref()
                .expect("two-boundary problems carry drift-scaled paths");
            let k_stages = lay.k_stages;
            for k in 0..k_stages {
                // Certificates for the reject cutoff.
                let mut rej_floor = milp.model.variables[lay.theta_rej(k)].lb;
                let mut rej_ceil = milp.model.variables[lay.theta_rej(k)].ub;
                // Certificates for the accept cutoff.
                let mut acc_floor = milp.model.variables[lay.theta_acc(k)].lb;
                let mut acc_ceil = milp.model.variables[lay.theta_acc(k)].ub;
                for m in 0..lay.m_paths {
                    let s = problem.null_paths.value(m, k);
                    if x[lay.null_below_rej(m, k)] > 0.5 {
                        rej_floor = rej_floor.max(s);
                    }
                    if x[lay.null_above_acc(m, k)] > 0.5 {
                        acc_ceil = acc_ceil.min(s);
                    }
                    if x[lay.null_below_acc(m, k)] > 0.5 {
                        acc_floor = acc_floor.max(s);
                    }
                    let sa = problem.alt_paths.value(m, k);
                    if x[lay.alt_below_rej(m, k)] < 0.5 {
                        rej_ceil = rej_ceil.min(sa);
                    }
                    if x[lay.alt_above_acc(m, k)] < 0.5 {
                        acc_floor = acc_floor.max(sa);
                    }
                    if x[lay.alt_below_acc(m, k)] < 0.5 {
                        acc_ceil = acc_ceil.min(sa);
                    }
                    let st = tilde.value(m, k);
                    if x[lay.tilde_below_rej(m, k)] < 0.5 {
                        rej_ceil = rej_ceil.min(st);
                    }
                    if x[lay.tilde_above_acc(m, k)] < 0.5 {
                        acc_ceil = acc_ceil.min(st);
                    }
                }
                if k == k_stages - 1 {
                    // Tied final stage: merge both certificate intervals.
                    let floor = rej_floor.max(acc_floor);
                    let ceil = rej_ceil.min(acc_ceil);
                    let tie = if ceil < floor {
                        floor
                    } else {
                        lower[k].clamp(floor, ceil)
                    };
                    lower[k] = tie;
                    upper[k] = tie;
                } else {
                    upper[k] = if rej_ceil < rej_floor {
                        rej_floor
                    } else {
                        upper[k].clamp(rej_floor, rej_ceil)
                    };
                    lower[k] = if acc_ceil < acc_floor {
                        acc_floor
                    } else {
                        lower[k].clamp(acc_floor, acc_ceil)
                    };
                    lower[k] = lower[k].min(upper[k]);
                }
            }
            CutoffVector::Symmetric { lower, upper }
        }
        _ => unreachable!("layout and cutoff kinds always match here"),
    }
}

/// Report cutoffs sitting strictly above every relevant sample at the
/// box ceiling: such a stage never stops anyone, and the ceiling is its
/// canonical representative (no indicator changes). The tied final
/// stage of a two-boundary design is left alone.
fn canonicalize_high_stages(
    problem: &SaaProblem,
    milp: &DesignMilp,
    cutoffs: CutoffVector,
) -> (CutoffVector, Vec<usize>) {
    let mut clamped = Vec::new();
    let out = match cutoffs {
        CutoffVector::Standard { mut thresholds } => {
            for (k, t) in thresholds.iter_mut().enumerate() {
                let null_max = problem
                    .null_paths
                    .stage_column(k)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                let alt_max = problem
                    .alt_paths
                    .stage_column(k)
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                let top = null_max.max(alt_max);
                if *t > top && *t < milp.theta_hi {
                    *t = milp.theta_hi;
                    clamped.push(k);
                }
            }
            CutoffVector::Standard { thresholds }
        }
        CutoffVector::Symmetric { lower, mut upper } => {
            let tilde = problem
                .tilde_paths
                .as_ref()
                .expect("two-boundary problems carry drift-scaled paths");
            for (k, u) in upper.iter_mut().enumerate().take(lower.len() - 1) {
                let mut top = f64::NEG_INFINITY;
                for col in [
                    problem.null_paths.stage_column(k),
                    problem.alt_paths.stage_column(k),
                    tilde.stage_column(k),
                ] {
                    top = col.into_iter().fold(top, f64::max);
                }
                if *u > top && *u < milp.theta_hi {
                    *u = milp.theta_hi;
                    clamped.push(k);
                }
            }
            CutoffVector::Symmetric { lower, upper }
        }
    };
    (out, clamped)
}
