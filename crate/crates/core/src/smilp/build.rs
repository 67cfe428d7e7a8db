//! Compile a sample-average design problem into a mixed-integer program.
//!
//! The single-boundary program keeps one continuous cutoff per stage and,
//! per simulated path, one crossing binary plus per-stage continue and
//! ran-through binaries. Big-M rows force a path's crossing binary up
//! whenever its statistic strictly exceeds a cutoff, force continue
//! binaries up while the alternative statistic stays strictly below, and
//! chain ran-through binaries to the continue prefix. The objective
//! charges each later stage's size for every alternative path still
//! running, scaled by `1/M`, on top of the committed first stage.
//!
//! The two-boundary program keeps accept and reject cutoffs per stage
//! (tied at the final stage) and eleven binary families per path and
//! stage: three weak null-side indicators feeding per-stage accept
//! binaries, three strict alternative-side indicators feeding per-stage
//! accept binaries on that law, and two strict drift-scaled indicators
//! feeding the continuation binaries the objective charges.
//!
//! Both builders share one threshold box. Samples outside the requested
//! box widen it just enough to keep every intended decision reachable:
//! the single-boundary program widens the floor to the smallest null
//! statistic and the ceiling to the largest alternative statistic, while
//! null statistics above the ceiling are deliberately left outside (they
//! represent paths the design can never retain, which is what makes
//! zero-budget problems correctly infeasible). The two-boundary program
//! widens over all three path sets, since both boundaries interact with
//! every law.
//!
//! The optional presolve is bounds-only and value-preserving: it never
//! touches the objective, so optimal values stay bit-comparable with the
//! unpresolved program.

use crate::error::Error;
use crate::milp::{MilpModel, Sense};
use crate::sampling::DesignSpec;
use crate::smilp::problem::{objective_terms, CutoffVector, SaaProblem};
use crate::Result;

/// Knobs for compiling a design problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildOptions {
    /// Requested threshold box; defaults per sidedness via
    /// [`default_theta_box`] and is widened when samples fall outside.
    pub theta_box: Option<(f64, f64)>,
    /// Tighten variable bounds and drop implied rows before solving.
    /// Off by default so the raw program is what oracle comparisons see.
    pub presolve: bool,
}

/// Default threshold box for a design spec: two-sided statistics are
/// folded to magnitudes, so their cutoffs live on the nonnegative axis.
pub fn default_theta_box(spec: &DesignSpec) -> (f64, f64) {
    if spec.sidedness.is_two() {
        (0.0, 10.0)
    } else {
        (-10.0, 10.0)
    }
}

/// Resolve the requested box against the problem's samples, widening as
/// described in the module docs. Returns `(lo, hi, widened)`.
pub fn effective_box(
    problem: &SaaProblem,
    requested: Option<(f64, f64)>,
) -> Result<(f64, f64, bool)> {
    let (mut lo, mut hi) = requested.unwrap_or_else(|| default_theta_box(&problem.spec));
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::validation(format!(
            "threshold box must be finite with lo < hi, got [{lo}, {hi}]"
        )));
    }
    let mut widened = false;
    let row_min = |paths: &crate::sampling::PathMatrix| {
        (0..paths.m_paths)
            .flat_map(|m| paths.row(m).iter().copied())
            .fold(f64::INFINITY, f64::min)
    };
    let row_max = |paths: &crate::sampling::PathMatrix| {
        (0..paths.m_paths)
            .flat_map(|m| paths.row(m).iter().copied())
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if let Some(tilde) = &problem.tilde_paths {
        let min = row_min(&problem.null_paths)
            .min(row_min(&problem.alt_paths))
            .min(row_min(tilde));
        let max = row_max(&problem.null_paths)
            .max(row_max(&problem.alt_paths))
            .max(row_max(tilde));
        if min < lo {
            lo = min - 1e-6;
            widened = true;
        }
        if max > hi {
            hi = max + 1e-6;
            widened = true;
        }
    } else {
        let null_min = row_min(&problem.null_paths);
        let alt_max = row_max(&problem.alt_paths);
        if null_min < lo {
            lo = null_min - 1e-6;
            widened = true;
        }
        if alt_max > hi {
            hi = alt_max + 1e-6;
            widened = true;
        }
    }
    Ok((lo, hi, widened))
}

/// Variable indexing for the single-boundary program: stage cutoffs
/// first, then per path one crossing binary followed by per-stage
/// continue and ran-through binaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StandardLayout {
    pub k_stages: usize,
    pub m_paths: usize,
}

impl StandardLayout {
    /// Stage-`k` cutoff (0-based stage).
    pub fn theta(&self, k: usize) -> usize {
        k
    }

    /// Path `m` crossed some cutoff (under the null).
    pub fn cross(&self, m: usize) -> usize {
        self.k_stages + m * (1 + 2 * self.k_stages)
    }

    /// Alternative path `m` is strictly below the stage-`k` cutoff.
    pub fn cont(&self, m: usize, k: usize) -> usize {
        self.cross(m) + 1 + k
    }

    /// Alternative path `m` stayed strictly below through stage `k`.
    pub fn through(&self, m: usize, k: usize) -> usize {
        self.cross(m) + 1 + self.k_stages + k
    }

    pub fn num_vars(&self) -> usize {
        self.k_stages + self.m_paths * (1 + 2 * self.k_stages)
    }
}

/// Variable indexing for the two-boundary program: accept cutoffs, then
/// reject cutoffs, then eleven binary families per path, each holding
/// one binary per stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetricLayout {
    pub k_stages: usize,
    pub m_paths: usize,
}

const FAMILIES: usize = 11;

impl SymmetricLayout {
    pub fn theta_acc(&self, k: usize) -> usize {
        k
    }

    pub fn theta_rej(&self, k: usize) -> usize {
        self.k_stages + k
    }

    fn fam(&self, m: usize, family: usize, k: usize) -> usize {
        2 * self.k_stages + m * FAMILIES * self.k_stages + family * self.k_stages + k
    }

    /// Null statistic weakly below the reject cutoff (weak indicator).
    pub fn null_below_rej(&self, m: usize, k: usize) -> usize {
        self.fam(m, 0, k)
    }

    /// Null statistic weakly above the accept cutoff.
    pub fn null_above_acc(&self, m: usize, k: usize) -> usize {
        self.fam(m, 1, k)
    }

    /// Null statistic weakly below the accept cutoff.
    pub fn null_below_acc(&self, m: usize, k: usize) -> usize {
        self.fam(m, 2, k)
    }

    /// Null path accepts at stage `k` (stayed in the closed band, then
    /// dropped weakly below the accept cutoff).
    pub fn null_accept(&self, m: usize, k: usize) -> usize {
        self.fam(m, 3, k)
    }

    /// Alternative statistic strictly below the reject cutoff.
    pub fn alt_below_rej(&self, m: usize, k: usize) -> usize {
        self.fam(m, 4, k)
    }

    /// Alternative statistic strictly above the accept cutoff.
    pub fn alt_above_acc(&self, m: usize, k: usize) -> usize {
        self.fam(m, 5, k)
    }

    /// Alternative statistic strictly below the accept cutoff.
    pub fn alt_below_acc(&self, m: usize, k: usize) -> usize {
        self.fam(m, 6, k)
    }

    /// Alternative path accepts at stage `k` (open band, strict drop).
    pub fn alt_accept(&self, m: usize, k: usize) -> usize {
        self.fam(m, 7, k)
    }

    /// Drift-scaled path still strictly inside the band through `k`.
    pub fn tilde_cont(&self, m: usize, k: usize) -> usize {
        self.fam(m, 8, k)
    }

    /// Drift-scaled statistic strictly below the reject cutoff.
    pub fn tilde_below_rej(&self, m: usize, k: usize) -> usize {
        self.fam(m, 9, k)
    }

    /// Drift-scaled statistic strictly above the accept cutoff.
    pub fn tilde_above_acc(&self, m: usize, k: usize) -> usize {
        self.fam(m, 10, k)
    }

    pub fn num_vars(&self) -> usize {
        2 * self.k_stages + self.m_paths * FAMILIES * self.k_stages
    }
}

/// Which program a compiled model uses, with its index helper.
#[derive(Debug, Clone, Copy)]
pub enum MilpLayout {
    Standard(StandardLayout),
    Symmetric(SymmetricLayout),
}

/// What the bounds-only presolve did to the single-boundary program.
#[derive(Debug, Clone)]
pub struct PresolveStats {
    /// Largest number of crossing paths any tolerance-feasible integral
    /// point can afford, used to derive per-stage cutoff floors.
    pub crossing_budget: usize,
    /// Tightened per-stage cutoff bounds.
    pub stage_lb: Vec<f64>,
    pub stage_ub: Vec<f64>,
    /// Binary variables pinned by the tightened bounds.
    pub fixed_cross: usize,
    pub fixed_cont: usize,
    pub fixed_through: usize,
    /// Implied rows removed from the program.
    pub dropped_rows: usize,
}

/// A compiled design program plus everything needed to interpret its
/// solutions.
#[derive(Debug, Clone)]
pub struct DesignMilp {
    pub model: MilpModel,
    pub layout: MilpLayout,
    /// Effective threshold box the cutoff variables live in.
    pub theta_lo: f64,
    pub theta_hi: f64,
    /// Whether samples outside the requested box forced widening.
    pub widened: bool,
    /// Present when presolve ran (single-boundary programs only).
    pub presolve: Option<PresolveStats>,
}

impl DesignMilp {
    /// Read the stage cutoffs out of a solver assignment.
    pub fn extract_cutoffs(&self, x: &[f64]) -> Result<CutoffVector> {
        if x.len() != self.model.num_vars() {
            return Err(Error::validation(format!(
                "assignment has {} entries, program has {} variables",
                x.len(),
                self.model.num_vars()
            )));
        }
        match self.layout {
            MilpLayout::Standard(lay) => {
                let thresholds = (0..lay.k_stages).map(|k| x[lay.theta(k)]).collect();
                CutoffVector::standard(thresholds)
            }
            MilpLayout::Symmetric(lay) => {
                let k = lay.k_stages;
                let mut upper: Vec<f64> = (0..k).map(|j| x[lay.theta_rej(j)]).collect();
                let lower: Vec<f64> = (0..k)
                    .map(|j| x[lay.theta_acc(j)].min(upper[j]))
                    .collect();
                // The final-stage tie holds only to solver tolerance in
                // the raw assignment; snap it exactly.
                upper[k - 1] = lower[k - 1];
                CutoffVector::symmetric(lower, upper)
            }
        }
    }
}

/// Compile the single-boundary program for `problem`.
pub fn build_standard_milp(problem: &SaaProblem, opts: &BuildOptions) -> Result<DesignMilp> {
    problem.validate()?;
    if problem.is_symmetric() {
        return Err(Error::validation(
            "problem carries drift-scaled paths; build the two-boundary program instead",
        ));
    }
    let (lo, hi, widened) = effective_box(problem, opts.theta_box)?;
    let k_stages = problem.k_stages();
    let m_paths = problem.m_paths();
    let lay = StandardLayout { k_stages, m_paths };
    let mut model = MilpModel::new("single-boundary-design");
    for k in 0..k_stages {
        model.add_continuous(format!("theta_{}", k + 1), lo, hi);
    }
    for m in 0..m_paths {
        model.add_binary(format!("cross_m{m}"));
        for k in 0..k_stages {
            model.add_binary(format!("cont_m{m}_k{}", k + 1));
        }
        for k in 0..k_stages {
            model.add_binary(format!("through_m{m}_k{}", k + 1));
        }
    }
    debug_assert_eq!(model.num_vars(), lay.num_vars());

    for m in 0..m_paths {
        let null_row = problem.null_paths.row(m);
        let alt_row = problem.alt_paths.row(m);
        // Null crossing: s - theta_k <= (s - lo) * cross.
        for (k, &s) in null_row.iter().enumerate() {
            model.add_constraint(
                format!("force_cross_m{m}_k{}", k + 1),
                vec![(lay.theta(k), -1.0), (lay.cross(m), lo - s)],
                Sense::Le,
                -s,
            );
        }
        // Alternative continuation: theta_k - s <= (hi - s) * cont.
        for (k, &sa) in alt_row.iter().enumerate() {
            model.add_constraint(
                format!("force_cont_m{m}_k{}", k + 1),
                vec![(lay.theta(k), 1.0), (lay.cont(m, k), sa - hi)],
                Sense::Le,
                sa,
            );
        }
        // Ran-through chain: through_k >= sum(cont_1..k) - k + 1.
        for k in 0..k_stages {
            let mut coeffs = vec![(lay.through(m, k), 1.0)];
            for i in 0..=k {
                coeffs.push((lay.cont(m, i), -1.0));
            }
            model.add_constraint(
                format!("link_through_m{m}_k{}", k + 1),
                coeffs,
                Sense::Ge,
                -(k as f64),
            );
        }
    }
    let inv_m = 1.0 / m_paths as f64;
    model.add_constraint(
        "type1_budget",
        (0..m_paths).map(|m| (lay.cross(m), inv_m)).collect(),
        Sense::Le,
        problem.alpha_tilde,
    );
    if problem.beta < 1.0 {
        model.add_constraint(
            "type2_budget",
            (0..m_paths)
                .map(|m| (lay.through(m, k_stages - 1), inv_m))
                .collect(),
            Sense::Le,
            problem.beta,
        );
    }
    let (offset, coeffs) = objective_terms(&problem.spec, m_paths);
    let mut objective = Vec::with_capacity(m_paths * (k_stages - 1));
    for m in 0..m_paths {
        for (j0, &c) in coeffs.iter().enumerate() {
            objective.push((lay.through(m, j0), c));
        }
    }
    model.set_objective(objective, offset);

    let presolve = if opts.presolve {
        Some(presolve_standard(&mut model, problem, lay, lo, hi))
    } else {
        None
    };
    model.validate()?;
    Ok(DesignMilp {
        model,
        layout: MilpLayout::Standard(lay),
        theta_lo: lo,
        theta_hi: hi,
        widened,
        presolve,
    })
}

/// Bounds-only reductions for the single-boundary program.
///
/// Any integral point the solver can accept keeps the crossing count at
/// or below `floor(alpha_tilde*M + M*feas_tol)`, so each stage cutoff
/// must sit at or above the order statistic that leaves exactly that
/// many null samples strictly above it — a sound per-stage floor. The
/// ceiling drops to just above the largest sample at the stage, which
/// changes no indicator. The tightened bounds pin crossing binaries of
/// dominated paths to zero, pin continue binaries whose sample falls
/// outside the bounds, propagate forced continue prefixes into the
/// ran-through chain, drop rows the bounds now imply, and shrink the
/// big-M coefficients of surviving rows.
fn presolve_standard(
    model: &mut MilpModel,
    problem: &SaaProblem,
    lay: StandardLayout,
    lo: f64,
    hi: f64,
) -> PresolveStats {
    let k_stages = lay.k_stages;
    let m_paths = lay.m_paths;
    let mf = m_paths as f64;
    let budget_f = (problem.alpha_tilde * mf + mf * 1e-6 + 1e-9).floor();
    let crossing_budget = if budget_f >= mf {
        m_paths
    } else {
        budget_f.max(0.0) as usize
    };
    let mut stage_lb = vec![lo; k_stages];
    let mut stage_ub = vec![hi; k_stages];
    for k in 0..k_stages {
        let mut col = problem.null_paths.stage_column(k);
        col.sort_by(f64::total_cmp);
        let null_max = col[m_paths - 1];
        let alt_max = problem
            .alt_paths
            .stage_column(k)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        stage_ub[k] = (null_max.max(alt_max) + 1e-6).clamp(lo, hi);
        if crossing_budget < m_paths {
            // Order statistic leaving `crossing_budget + 1` samples at or
            // above it: a cutoff below this forces too many crossings.
            let floor_candidate = col[m_paths - 1 - crossing_budget];
            stage_lb[k] = floor_candidate.clamp(lo, stage_ub[k]);
        }
        model.variables[lay.theta(k)].lb = stage_lb[k];
        model.variables[lay.theta(k)].ub = stage_ub[k];
    }

    let rows_per_path = 3 * k_stages;
    let mut drop_row = vec![false; model.constraints.len()];
    let mut fixed_cross = 0usize;
    let mut fixed_cont = 0usize;
    let mut fixed_through = 0usize;
    let mut fixed_one = vec![false; k_stages];
    let mut fixed_zero = vec![false; k_stages];
    for m in 0..m_paths {
        let null_row = problem.null_paths.row(m);
        if (0..k_stages).all(|k| null_row[k] <= stage_lb[k]) {
            model.variables[lay.cross(m)].ub = 0.0;
            fixed_cross += 1;
        }
        for (k, &s) in null_row.iter().enumerate() {
            let ridx = m * rows_per_path + k;
            if s <= stage_lb[k] {
                // theta_k >= stage_lb >= s: the row is implied.
                drop_row[ridx] = true;
            } else {
                for c in &mut model.constraints[ridx].coeffs {
                    if c.0 == lay.cross(m) {
                        c.1 = stage_lb[k] - s;
                    }
                }
            }
        }
        let alt_row = problem.alt_paths.row(m);
        for (k, &sa) in alt_row.iter().enumerate() {
            let ridx = m * rows_per_path + k_stages + k;
            fixed_one[k] = false;
            fixed_zero[k] = false;
            if sa < stage_lb[k] {
                model.variables[lay.cont(m, k)].lb = 1.0;
                fixed_one[k] = true;
                fixed_cont += 1;
                drop_row[ridx] = true;
            } else if sa >= stage_ub[k] {
                model.variables[lay.cont(m, k)].ub = 0.0;
                fixed_zero[k] = true;
                fixed_cont += 1;
                drop_row[ridx] = true;
            } else {
                for c in &mut model.constraints[ridx].coeffs {
                    if c.0 == lay.cont(m, k) {
                        c.1 = sa - stage_ub[k];
                    }
                }
            }
        }
        let mut all_one = true;
        let mut any_zero = false;
        for k in 0..k_stages {
            all_one &= fixed_one[k];
            any_zero |= fixed_zero[k];
            let ridx = m * rows_per_path + 2 * k_stages + k;
            if any_zero {
                model.variables[lay.through(m, k)].ub = 0.0;
                fixed_through += 1;
                drop_row[ridx] = true;
            } else if all_one {
                model.variables[lay.through(m, k)].lb = 1.0;
                fixed_through += 1;
                drop_row[ridx] = true;
            }
        }
    }
    let before = model.constraints.len();
    let mut kept = Vec::with_capacity(before);
    for (i, c) in model.constraints.drain(..).enumerate() {
        if !drop_row[i] {
            kept.push(c);
        }
    }
    model.constraints = kept;
    PresolveStats {
        crossing_budget,
        stage_lb,
        stage_ub,
        fixed_cross,
        fixed_cont,
        fixed_through,
        dropped_rows: before - model.constraints.len(),
    }
}

/// Compile the two-boundary program for `problem`. Presolve is a no-op
/// here: the budget couples accept events across stages, so no simple
/// per-stage bound is sound, and these programs stay small in practice.
pub fn build_symmetric_milp(problem: &SaaProblem, opts: &BuildOptions) -> Result<DesignMilp> {
    problem.validate()?;
    let tilde = problem.tilde_paths.as_ref().ok_or_else(|| {
        Error::validation("two-boundary program needs drift-scaled paths in the problem")
    })?;
    let (lo, hi, widened) = effective_box(problem, opts.theta_box)?;
    let k_stages = problem.k_stages();
    let m_paths = problem.m_paths();
    let lay = SymmetricLayout { k_stages, m_paths };
    let mut model = MilpModel::new("two-boundary-design");
    for k in 0..k_stages {
        model.add_continuous(format!("theta_acc_{}", k + 1), lo, hi);
    }
    for k in 0..k_stages {
        model.add_continuous(format!("theta_rej_{}", k + 1), lo, hi);
    }
    for m in 0..m_paths {
        let families = [
            "null_below_rej",
            "null_above_acc",
            "null_below_acc",
            "null_accept",
            "alt_below_rej",
            "alt_above_acc",
            "alt_below_acc",
            "alt_accept",
            "tilde_cont",
            "tilde_below_rej",
            "tilde_above_acc",
        ];
        for fam in families {
            for k in 0..k_stages {
                model.add_binary(format!("{fam}_m{m}_k{}", k + 1));
            }
        }
    }
    debug_assert_eq!(model.num_vars(), lay.num_vars());

    for m in 0..m_paths {
        let null_row = problem.null_paths.row(m);
        let alt_row = problem.alt_paths.row(m);
        let tilde_row = tilde.row(m);
        // Weak null-side indicators.
        for (k, &s) in null_row.iter().enumerate() {
            model.add_constraint(
                format!("def_null_below_rej_m{m}_k{}", k + 1),
                vec![(lay.theta_rej(k), 1.0), (lay.null_below_rej(m, k), lo - s)],
                Sense::Ge,
                lo,
            );
        }
        for (k, &s) in null_row.iter().enumerate() {
            model.add_constraint(
                format!("def_null_above_acc_m{m}_k{}", k + 1),
                vec![(lay.theta_acc(k), 1.0), (lay.null_above_acc(m, k), hi - s)],
                Sense::Le,
                hi,
            );
        }
        for (k, &s) in null_row.iter().enumerate() {
            model.add_constraint(
                format!("def_null_below_acc_m{m}_k{}", k + 1),
                vec![(lay.theta_acc(k), 1.0), (lay.null_below_acc(m, k), lo - s)],
                Sense::Ge,
                lo,
            );
        }
        // Null accept events: in the closed band through k-1, then
        // weakly below the accept cutoff at k.
        for k in 0..k_stages {
            for i in 0..k {
                model.add_constraint(
                    format!("link_acc_null_rej_m{m}_k{}_i{}", k + 1, i + 1),
                    vec![
                        (lay.null_accept(m, k), 1.0),
                        (lay.null_below_rej(m, i), -1.0),
                    ],
                    Sense::Le,
                    0.0,
                );
            }
            for i in 0..k {
                model.add_constraint(
                    format!("link_acc_null_abv_m{m}_k{}_i{}", k + 1, i + 1),
                    vec![
                        (lay.null_accept(m, k), 1.0),
                        (lay.null_above_acc(m, i), -1.0),
                    ],
                    Sense::Le,
                    0.0,
                );
            }
            model.add_constraint(
                format!("link_acc_null_blw_m{m}_k{}", k + 1),
                vec![
                    (lay.null_accept(m, k), 1.0),
                    (lay.null_below_acc(m, k), -1.0),
                ],
                Sense::Le,
                0.0,
            );
        }
        // Strict alternative-side indicators.
        for (k, &sa) in alt_row.iter().enumerate() {
            model.add_constraint(
                format!("def_alt_below_rej_m{m}_k{}", k + 1),
                vec![(lay.theta_rej(k), -1.0), (lay.alt_below_rej(m, k), hi - sa)],
                Sense::Ge,
                -sa,
            );
        }
        for (k, &sa) in alt_row.iter().enumerate() {
            model.add_constraint(
                format!("def_alt_above_acc_m{m}_k{}", k + 1),
                vec![(lay.theta_acc(k), 1.0), (lay.alt_above_acc(m, k), sa - lo)],
                Sense::Ge,
                sa,
            );
        }
        for (k, &sa) in alt_row.iter().enumerate() {
            model.add_constraint(
                format!("def_alt_below_acc_m{m}_k{}", k + 1),
                vec![(lay.theta_acc(k), -1.0), (lay.alt_below_acc(m, k), hi - sa)],
                Sense::Ge,
                -sa,
            );
        }
        // Alternative accept events: strictly inside through k-1, then
        // strictly below the accept cutoff at k.
        for k in 0..k_stages {
            let mut coeffs = vec![(lay.alt_accept(m, k), 1.0)];
            for i in 0..k {
                coeffs.push((lay.alt_below_rej(m, i), -1.0));
                coeffs.push((lay.alt_above_acc(m, i), -1.0));
            }
            coeffs.push((lay.alt_below_acc(m, k), -1.0));
            model.add_constraint(
                format!("link_acc_alt_m{m}_k{}", k + 1),
                coeffs,
                Sense::Ge,
                -2.0 * k as f64,
            );
        }
        // Strict drift-scaled indicators and the continuation chain the
        // objective charges.
        for (k, &st) in tilde_row.iter().enumerate() {
            model.add_constraint(
                format!("def_tilde_below_rej_m{m}_k{}", k + 1),
                vec![
                    (lay.theta_rej(k), -1.0),
                    (lay.tilde_below_rej(m, k), hi - st),
                ],
                Sense::Ge,
                -st,
            );
        }
        for (k, &st) in tilde_row.iter().enumerate() {
            model.add_constraint(
                format!("def_tilde_above_acc_m{m}_k{}", k + 1),
                vec![
                    (lay.theta_acc(k), 1.0),
                    (lay.tilde_above_acc(m, k), st - lo),
                ],
                Sense::Ge,
                st,
            );
        }
        for k in 0..k_stages {
            let mut coeffs = vec![(lay.tilde_cont(m, k), 1.0)];
            for i in 0..=k {
                coeffs.push((lay.tilde_below_rej(m, i), -1.0));
                coeffs.push((lay.tilde_above_acc(m, i), -1.0));
            }
            model.add_constraint(
                format!("link_cont_tilde_m{m}_k{}", k + 1),
                coeffs,
                Sense::Ge,
                -(2.0 * k as f64) - 1.0,
            );
        }
    }
    // Boundary order per stage, tied at the final stage.
    for k in 0..k_stages.saturating_sub(1) {
        model.add_constraint(
            format!("order_k{}", k + 1),
            vec![(lay.theta_acc(k), 1.0), (lay.theta_rej(k), -1.0)],
            Sense::Le,
            0.0,
        );
    }
    model.add_constraint(
        "tie_final",
        vec![
            (lay.theta_acc(k_stages - 1), 1.0),
            (lay.theta_rej(k_stages - 1), -1.0),
        ],
        Sense::Eq,
        0.0,
    );
    let inv_m = 1.0 / m_paths as f64;
    let mut acc_terms = Vec::with_capacity(m_paths * k_stages);
    for m in 0..m_paths {
        for k in 0..k_stages {
            acc_terms.push((lay.null_accept(m, k), inv_m));
        }
    }
    model.add_constraint(
        "type1_budget",
        acc_terms,
        Sense::Ge,
        1.0 - problem.alpha_tilde,
    );
    if problem.beta < 1.0 {
        let mut alt_terms = Vec::with_capacity(m_paths * k_stages);
        for m in 0..m_paths {
            for k in 0..k_stages {
                alt_terms.push((lay.alt_accept(m, k), inv_m));
            }
        }
        model.add_constraint("type2_budget", alt_terms, Sense::Le, problem.beta);
    }
    let (offset, coeffs) = objective_terms(&problem.spec, m_paths);
    let mut objective = Vec::with_capacity(m_paths * (k_stages - 1));
    for m in 0..m_paths {
        for (j0, &c) in coeffs.iter().enumerate() {
            objective.push((lay.tilde_cont(m, j0), c));
        }
    }
    model.set_objective(objective, offset);
    if opts.presolve {
        // No sound per-stage reduction exists for this program; compile
        // it as-is.
    }
    model.validate()?;
    Ok(DesignMilp {
        model,
        layout: MilpLayout::Symmetric(lay),
        theta_lo: lo,
        theta_hi: hi,
        widened,
        presolve: None,
    })
}
