//! Deterministic branch-and-bound over the bounded-variable simplex.
//!
//! Node selection is best-bound with node id as the tie-break; branching
//! picks the most-fractional binary, ties broken by lowest variable
//! index. Node relaxations are warm-started dually from the shared
//! simplex state, and constraint rows activate lazily: a row joins the
//! working set only once some node's relaxation violates it. A working
//! subset's optimum is always a valid lower bound for the full model, so
//! lazy activation never compromises pruning.
//!
//! Incumbents come from three sources: the caller's warm start, node
//! relaxations that land integral, and an optional rounding callback.
//! Every candidate is verified against the full model and re-priced with
//! the canonical objective (ascending variable index), so equal
//! assignments report bit-equal values no matter which path found them.
//! Because lazy pricing tolerates small scaled row violations while the
//! verifier applies an unscaled tolerance, integral vertices get a
//! second, stricter pricing pass at the snapped point before they may
//! fathom a node; a vertex that still fails verification triggers a
//! branch on an unfixed binary rather than fathoming, so no subtree is
//! ever discarded on the word of an uncertified point.
//!
//! Effort is budgeted in deterministic work ticks, not wall time: two
//! runs with identical inputs visit identical nodes and return identical
//! solutions.

use std::collections::BinaryHeap;
use std::time::Instant;

use serde::Serialize;

use crate::Result;

use super::model::{MilpModel, Sense, VarKind};
use super::simplex::{LpOutcome, Simplex, TickBudget};

/// Solver status. `TimeLimitIncumbent` covers every resource exhaustion
/// (tick budget or node limit), with or without a feasible incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MilpStatus {
    Optimal,
    Infeasible,
    TimeLimitIncumbent,
    Unbounded,
}

/// Result of a branch-and-bound run.
#[derive(Debug, Clone)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Canonical objective of the incumbent, if any.
    pub value: Option<f64>,
    pub assignment: Option<Vec<f64>>,
    /// incumbent - best outstanding bound (0 when proven optimal).
    pub abs_gap: f64,
    /// abs_gap / max(1, |incumbent|).
    pub rel_gap: f64,
    /// Best lower bound on the optimal value.
    pub lower_bound: f64,
    /// Nodes whose relaxation was solved (root included).
    pub node_count: u64,
    /// Total simplex pivots across all node solves.
    pub lp_iterations: u64,
    /// Deterministic work consumed.
    pub ticks_used: u64,
    /// Wall-clock seconds (informational; never part of deterministic
    /// artifacts).
    pub wall_secs: f64,
}

/// Branch-and-bound parameters. Defaults match the documented tolerances;
/// limits default to unlimited.
#[derive(Debug, Clone)]
pub struct BnbParams {
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub int_tol: f64,
    pub feas_tol: f64,
    /// Deterministic work budget (ticks). `u64::MAX` means unlimited.
    pub tick_limit: u64,
    pub node_limit: u64,
    /// Feasible integral assignment to seed the incumbent.
    pub warm_start: Option<Vec<f64>>,
    /// Soft cap on lazily activated rows; correctness-critical
    /// activations ignore it.
    pub max_working_rows: usize,
    /// Most-violated rows activated per pricing wave.
    pub rows_per_wave: usize,
}

impl Default for BnbParams {
    fn default() -> Self {
        BnbParams {
            rel_gap: 1e-6,
            abs_gap: 1e-9,
            int_tol: 1e-6,
            feas_tol: 1e-6,
            tick_limit: u64::MAX,
            node_limit: u64::MAX,
            warm_start: None,
            max_working_rows: usize::MAX,
            rows_per_wave: 256,
        }
    }
}

struct Node {
    parent: usize,
    depth: u32,
    /// Branching fix applied at this node (usize::MAX for the root).
    fix_col: usize,
    fix_lb: f64,
    fix_ub: f64,
}

/// Max-heap entry ordered so that pop() yields the smallest bound, ties
/// by lowest node id.
#[derive(PartialEq)]
struct HeapEntry {
    bound: f64,
    id: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Solve a MILP by branch-and-bound.
pub fn solve_bnb(model: &MilpModel, params: &BnbParams) -> Result<MilpSolution> {
    solve_bnb_with_rounding(model, params, |_x: &[f64]| None)
}

/// Branch-and-bound with a rounding callback: at every solved node the
/// callback sees the full-length relaxation point and may propose a
/// candidate assignment. Candidates are verified against the complete
/// model before they can become incumbents.
pub fn solve_bnb_with_rounding<F>(
    model: &MilpModel,
    params: &BnbParams,
    mut rounding: F,
) -> Result<MilpSolution>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    model.validate()?;
    let clock = Instant::now();
    let mut search = Search::new(model, params)?;

    // Warm start: verified against the full model, else ignored.
    if let Some(ws) = &params.warm_start {
        search.offer_incumbent(ws.clone());
    }

    let outcome = search.run(&mut rounding)?;
    Ok(search.finish(outcome, clock.elapsed().as_secs_f64()))
}

enum RunOutcome {
    Exhausted,
    Limited,
    RootInfeasible,
    RootUnbounded,
}

/// Verdict on a candidate incumbent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Offer {
    /// Verified feasible and adopted as the new incumbent.
    Accepted,
    /// Verified feasible but no better than the current incumbent.
    NotBetter,
    /// Failed verification against the full model.
    Rejected,
}

struct Search<'a> {
    model: &'a MilpModel,
    params: &'a BnbParams,
    simplex: Simplex,
    budget: TickBudget,
    /// global col -> local structural col (usize::MAX while dormant).
    local_of: Vec<usize>,
    /// local structural col -> global col.
    global_of: Vec<usize>,
    /// Value a dormant column contributes (its cost-favorable bound).
    dormant_value: Vec<f64>,
    /// Objective contribution of all currently dormant columns.
    dormant_cost: f64,
    row_active: Vec<bool>,
    active_rows: usize,
    nodes: Vec<Node>,
    heap: BinaryHeap<HeapEntry>,
    /// Arena id of the node whose bounds the simplex currently carries.
    applied: usize,
    incumbent: Option<(f64, Vec<f64>)>,
    binaries: Vec<usize>,
    node_count: u64,
    unbounded_root: bool,
    infeasible_root: bool,
}

impl<'a> Search<'a> {
    fn new(model: &'a MilpModel, params: &'a BnbParams) -> Result<Search<'a>> {
        let n = model.num_vars();
        let mut cost = vec![0.0; n];
        for &(j, c) in &model.objective {
            cost[j] = c;
        }
        let mut dormant_value = vec![0.0; n];
        let mut must_activate = Vec::new();
        for (j, v) in model.variables.iter().enumerate() {
            let favor = if cost[j] > 0.0 {
                v.lb
            } else if cost[j] < 0.0 {
                v.ub
            } else if v.lb.is_finite() {
                v.lb
            } else if v.ub.is_finite() {
                v.ub
            } else {
                0.0
            };
            if !favor.is_finite() {
                // No finite favorable parking spot: the column must live
                // in the working set from the start.
                must_activate.push(j);
                dormant_value[j] = 0.0;
            } else {
                dormant_value[j] = favor;
            }
        }
        let dormant_cost = (0..n).map(|j| cost[j] * dormant_value[j]).sum();
        let mut search = Search {
            model,
            params,
            simplex: Simplex::new(),
            budget: TickBudget::with_limit(params.tick_limit),
            local_of: vec![usize::MAX; n],
            global_of: Vec::new(),
            dormant_value,
            dormant_cost,
            row_active: vec![false; model.num_constraints()],
            active_rows: 0,
            nodes: vec![Node {
                parent: usize::MAX,
                depth: 0,
                fix_col: usize::MAX,
                fix_lb: 0.0,
                fix_ub: 0.0,
            }],
            heap: BinaryHeap::new(),
            applied: 0,
            incumbent: None,
            binaries: model
                .variables
                .iter()
                .enumerate()
                .filter(|(_, v)| v.kind == VarKind::Binary)
                .map(|(j, _)| j)
                .collect(),
            node_count: 0,
            unbounded_root: false,
            infeasible_root: false,
        };
        for j in must_activate {
            search.activate_col(j);
        }
        Ok(search)
    }

    fn cost_of(&self, j: usize) -> f64 {
        // Sparse objective lookup; called rarely (activation only).
        self.model
            .objective
            .iter()
            .find(|&&(k, _)| k == j)
            .map(|&(_, c)| c)
            .unwrap_or(0.0)
    }

    /// Move a dormant column into the working set at its parked bound.
    fn activate_col(&mut self, j: usize) {
        if self.local_of[j] != usize::MAX {
            return;
        }
        let v = &self.model.variables[j];
        let cost = self.cost_of(j);
        let park = self.dormant_value[j];
        let at_upper = v.ub.is_finite() && park == v.ub && park != v.lb;
        // Entries over already-active rows are attached by activate_row;
        // a column activated here has none yet by construction (its rows
        // activate right after, via add_row).
        let local = self
            .simplex
            .add_structural(Vec::new(), cost, v.lb, v.ub, at_upper);
        self.local_of[j] = local;
        if self.global_of.len() <= local {
            self.global_of.resize(local + 1, usize::MAX);
        }
        self.global_of[local] = j;
        self.dormant_cost -= cost * park;
    }

    /// Activate a model row: all its columns first, then the row itself.
    fn activate_row(&mut self, r: usize) {
        if self.row_active[r] {
            return;
        }
        let con = &self.model.constraints[r];
        for &(j, _) in &con.coeffs {
            self.activate_col(j);
        }
        let coeffs: Vec<(usize, f64)> = con
            .coeffs
            .iter()
            .map(|&(j, c)| (self.local_of[j], c))
            .collect();
        self.simplex.add_row(&coeffs, con.sense, con.rhs);
        let m = self.simplex.num_rows() as u64;
        self.budget.used = self.budget.used.saturating_add(m * m / 16 + 32);
        self.row_active[r] = true;
        self.active_rows += 1;
    }

    /// Full-length point: active columns from the simplex, dormant ones
    /// at their parked values.
    fn full_point(&self) -> Vec<f64> {
        let mut x = self.dormant_value.clone();
        for (local, &g) in self.global_of.iter().enumerate() {
            if g != usize::MAX {
                x[g] = self.simplex.x[local];
            }
        }
        x
    }

    /// Working LP value lifted to the full model: simplex objective plus
    /// dormant contributions plus the model offset.
    fn lifted_value(&self) -> f64 {
        self.simplex.objective() + self.dormant_cost + self.model.objective_offset
    }

    /// Violated dormant rows at `x`, most violated first, deterministic.
    fn violated_rows(&mut self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        let mut nnz = 0usize;
        for (r, con) in self.model.constraints.iter().enumerate() {
            if self.row_active[r] {
                continue;
            }
            nnz += con.coeffs.len();
            let act: f64 = con.coeffs.iter().map(|&(j, c)| c * x[j]).sum();
            let viol = match con.sense {
                Sense::Le => act - con.rhs,
                Sense::Ge => con.rhs - act,
                Sense::Eq => (act - con.rhs).abs(),
            };
            let scale = 1.0 + con.rhs.abs();
            if viol > self.params.feas_tol * scale {
                out.push((r, viol / scale));
            }
        }
        self.budget.used = self.budget.used.saturating_add(nnz as u64 / 16 + 8);
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }

    /// Offer a full-length assignment as incumbent; it must verify
    /// against the complete model. Binaries are snapped exactly before
    /// canonical pricing.
    fn offer_incumbent(&mut self, mut x: Vec<f64>) -> Offer {
        if x.len() != self.model.num_vars() {
            return Offer::Rejected;
        }
        for &j in &self.binaries {
            let snapped = x[j].round();
            if (x[j] - snapped).abs() > self.params.int_tol {
                return Offer::Rejected;
            }
            x[j] = snapped;
        }
        if !self
            .model
            .is_feasible(&x, self.params.feas_tol, self.params.int_tol)
        {
            return Offer::Rejected;
        }
        let value = self.model.objective_value(&x);
        let better = match &self.incumbent {
            None => true,
            Some((best, _)) => value < *best,
        };
        if better {
            self.incumbent = Some((value, x));
            Offer::Accepted
        } else {
            Offer::NotBetter
        }
    }

    fn prune_threshold(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|(v, _)| {
            let slack = self.params.abs_gap.max(self.params.rel_gap * v.abs());
            v - slack
        })
    }

    /// Re-point the simplex bounds from the currently applied node to
    /// `target` via their lowest common ancestor.
    fn switch_to(&mut self, target: usize) {
        if self.applied == target {
            return;
        }
        let mut a = self.applied;
        let mut b = target;
        let mut undo = Vec::new();
        let mut redo = Vec::new();
        while self.nodes[a].depth > self.nodes[b].depth {
            undo.push(a);
            a = self.nodes[a].parent;
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            redo.push(b);
            b = self.nodes[b].parent;
        }
        while a != b {
            undo.push(a);
            redo.push(b);
            a = self.nodes[a].parent;
            b = self.nodes[b].parent;
        }
        for id in undo {
            let n = &self.nodes[id];
            if n.fix_col != usize::MAX {
                let v = &self.model.variables[n.fix_col];
                let local = self.local_of[n.fix_col];
                debug_assert_ne!(local, usize::MAX, "branched column must be active");
                self.simplex.set_bounds(local, v.lb, v.ub);
            }
        }
        for &id in redo.iter().rev() {
            let n = &self.nodes[id];
            if n.fix_col != usize::MAX {
                let local = self.local_of[n.fix_col];
                self.simplex.set_bounds(local, n.fix_lb, n.fix_ub);
            }
        }
        self.applied = target;
    }

    /// Solve the relaxation at the applied node, activating violated rows
    /// until the point prices out clean (or the soft cap stops heuristic
    /// waves). Returns the node's valid lower bound and LP outcome.
    fn solve_node(&mut self, fresh: bool) -> Result<(LpOutcome, f64)> {
        let mut first = true;
        loop {
            let out = if first && fresh {
                self.simplex.primal_solve(&mut self.budget)?
            } else {
                self.simplex.dual_solve(&mut self.budget)?
            };
            first = false;
            match out {
                LpOutcome::Optimal => {}
                other => return Ok((other, f64::NEG_INFINITY)),
            }
            let x = self.full_point();
            let viols = self.violated_rows(&x);
            if viols.is_empty() {
                // Integral vertices face the verifier's unscaled
                // tolerance, while the wave pricing above is scaled per
                // row. Close that gap before letting the vertex fathom a
                // node: activate any dormant row the snapped point
                // violates on the stricter standard and re-solve.
                if self.is_integral_point(&x) {
                    let strict = self.strict_dormant_violations(&x);
                    if !strict.is_empty() {
                        for r in strict {
                            self.activate_row(r);
                        }
                        if self.budget.exhausted() {
                            return Ok((LpOutcome::Aborted, f64::NEG_INFINITY));
                        }
                        continue;
                    }
                }
                return Ok((LpOutcome::Optimal, self.lifted_value()));
            }
            // The working optimum is a valid bound even with rows
            // missing; stop expanding at the soft cap unless integrality
            // would otherwise accept an infeasible point.
            let over_cap = self.active_rows >= self.params.max_working_rows;
            if over_cap && !self.is_integral_point(&x) {
                return Ok((LpOutcome::Optimal, self.lifted_value()));
            }
            let wave = viols
                .into_iter()
                .take(self.params.rows_per_wave)
                .collect::<Vec<_>>();
            for (r, _) in wave {
                self.activate_row(r);
            }
            if self.budget.exhausted() {
                return Ok((LpOutcome::Aborted, f64::NEG_INFINITY));
            }
        }
    }

    /// Dormant rows violated at the binary-snapped point by more than
    /// half the unscaled feasibility tolerance — the margin that
    /// guarantees a vertex passing this scan also passes incumbent
    /// verification. Ascending row order keeps activation deterministic.
    fn strict_dormant_violations(&mut self, x: &[f64]) -> Vec<usize> {
        let mut snapped = x.to_vec();
        for &j in &self.binaries {
            snapped[j] = snapped[j].round();
        }
        let mut out = Vec::new();
        let mut nnz = 0usize;
        for (r, con) in self.model.constraints.iter().enumerate() {
            if self.row_active[r] {
                continue;
            }
            nnz += con.coeffs.len();
            let act: f64 = con.coeffs.iter().map(|&(j, c)| c * snapped[j]).sum();
            let viol = match con.sense {
                Sense::Le => act - con.rhs,
                Sense::Ge => con.rhs - act,
                Sense::Eq => (act - con.rhs).abs(),
            };
            if viol > self.params.feas_tol * 0.5 {
                out.push(r);
            }
        }
        self.budget.used = self.budget.used.saturating_add(nnz as u64 / 16 + 8);
        out
    }

    fn is_integral_point(&self, x: &[f64]) -> bool {
        self.binaries
            .iter()
            .all(|&j| (x[j] - x[j].round()).abs() <= self.params.int_tol)
    }

    /// Most-fractional binary at `x`, ties by lowest variable index.
    fn branch_col(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let frac = (x[j] - x[j].round()).abs();
            if frac <= self.params.int_tol {
                continue;
            }
            // Distance from the nearest integer, larger = more fractional.
            if best.map_or(true, |(_, bf)| frac > bf) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    fn run<F>(&mut self, rounding: &mut F) -> Result<RunOutcome>
    where
        F: FnMut(&[f64]) -> Option<Vec<f64>>,
    {
        // Root relaxation.
        let (out, bound) = self.solve_node(true)?;
        self.node_count = 1;
        match out {
            LpOutcome::Infeasible => {
                self.infeasible_root = true;
                return Ok(RunOutcome::RootInfeasible);
            }
            LpOutcome::Unbounded => {
                self.unbounded_root = true;
                return Ok(RunOutcome::RootUnbounded);
            }
            LpOutcome::Aborted => return Ok(RunOutcome::Limited),
            LpOutcome::Optimal => {}
        }
        self.process_solved_node(0, bound, rounding);

        loop {
            // Optimality by bound closure.
            if let Some(threshold) = self.prune_threshold() {
                while let Some(top) = self.heap.peek() {
                    if top.bound >= threshold {
                        self.heap.pop();
                    } else {
                        break;
                    }
                }
            }
            let Some(entry) = self.heap.pop() else {
                return Ok(RunOutcome::Exhausted);
            };
            if self.budget.exhausted() || self.node_count >= self.params.node_limit {
                self.heap.push(entry);
                return Ok(RunOutcome::Limited);
            }
            self.switch_to(entry.id);
            let (out, bound) = self.solve_node(false)?;
            self.node_count += 1;
            match out {
                LpOutcome::Infeasible => continue,
                LpOutcome::Unbounded => {
                    // Impossible when the root was bounded; treat as a
                    // numerical fault.
                    return Err(crate::error::Error::Numerical(
                        "node relaxation unbounded below a bounded root".into(),
                    ));
                }
                LpOutcome::Aborted => {
                    // Re-queue so the reported global bound stays honest.
                    self.heap.push(entry);
                    return Ok(RunOutcome::Limited);
                }
                LpOutcome::Optimal => {}
            }
            self.process_solved_node(entry.id, bound, rounding);
        }
    }

    /// Incumbent extraction and branching for a node solved to LP
    /// optimality with bound `bound`.
    fn process_solved_node<F>(&mut self, id: usize, bound: f64, rounding: &mut F)
    where
        F: FnMut(&[f64]) -> Option<Vec<f64>>,
    {
        if let Some(threshold) = self.prune_threshold() {
            if bound >= threshold {
                return;
            }
        }
        let x = self.full_point();
        if let Some(candidate) = rounding(&x) {
            self.offer_incumbent(candidate);
        }
        if self.is_integral_point(&x) {
            match self.offer_incumbent(x.clone()) {
                // Verified: the vertex is the subtree's optimum (its LP
                // bound equals its value), so the node fathoms whether or
                // not it improved the incumbent.
                Offer::Accepted | Offer::NotBetter => return,
                // Integral within tolerance yet uncertifiable — e.g. a
                // binary a hair off its bound under a wide-coefficient
                // row, where snapping tips the row past the unscaled
                // tolerance. Fathoming would discard the subtree on the
                // word of an uncertified point; branching on an unfixed
                // binary removes the slop instead. Only a node with every
                // binary already fixed has nothing left to try.
                Offer::Rejected => {
                    if let Some(col) = self.fallback_branch_col(&x) {
                        self.activate_col(col);
                        self.push_children(id, bound, col);
                    }
                    return;
                }
            }
        }
        let Some(col) = self.branch_col(&x) else {
            return;
        };
        self.push_children(id, bound, col);
    }

    /// A binary the applied node has not fixed (its working bounds still
    /// allow both values), preferring the most fractional value at `x`,
    /// ties by lowest variable index.
    fn fallback_branch_col(&self, x: &[f64]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.binaries {
            let local = self.local_of[j];
            let (lb, ub) = if local == usize::MAX {
                let v = &self.model.variables[j];
                (v.lb, v.ub)
            } else {
                (self.simplex.cols[local].lb, self.simplex.cols[local].ub)
            };
            if lb == ub {
                continue;
            }
            let frac = (x[j] - x[j].round()).abs();
            if best.map_or(true, |(_, bf)| frac > bf) {
                best = Some((j, frac));
            }
        }
        best.map(|(j, _)| j)
    }

    /// Push both children of a branch on `col`; the fix-to-zero child
    /// gets the smaller id.
    fn push_children(&mut self, id: usize, bound: f64, col: usize) {
        for (lb, ub) in [(0.0, 0.0), (1.0, 1.0)] {
            let child = Node {
                parent: id,
                depth: self.nodes[id].depth + 1,
                fix_col: col,
                fix_lb: lb,
                fix_ub: ub,
            };
            self.nodes.push(child);
            let child_id = self.nodes.len() - 1;
            self.heap.push(HeapEntry {
                bound,
                id: child_id,
            });
        }
    }

    fn finish(mut self, outcome: RunOutcome, wall_secs: f64) -> MilpSolution {
        let (status, lower_bound) = match outcome {
            RunOutcome::RootInfeasible => (MilpStatus::Infeasible, f64::INFINITY),
            RunOutcome::RootUnbounded => (MilpStatus::Unbounded, f64::NEG_INFINITY),
            RunOutcome::Exhausted => {
                if self.incumbent.is_some() {
                    let v = self.incumbent.as_ref().unwrap().0;
                    (MilpStatus::Optimal, v)
                } else {
                    (MilpStatus::Infeasible, f64::INFINITY)
                }
            }
            RunOutcome::Limited => {
                let lb = self
                    .heap
                    .peek()
                    .map(|e| e.bound)
                    .or_else(|| self.incumbent.as_ref().map(|(v, _)| *v))
                    .unwrap_or(f64::NEG_INFINITY);
                (MilpStatus::TimeLimitIncumbent, lb)
            }
        };
        let (value, assignment) = match self.incumbent.take() {
            Some((v, x)) => (Some(v), Some(x)),
            None => (None, None),
        };
        let (abs_gap, rel_gap) = match value {
            Some(v) if lower_bound.is_finite() => {
                let a = (v - lower_bound).max(0.0);
                (a, a / v.abs().max(1.0))
            }
            _ => (f64::INFINITY, f64::INFINITY),
        };
        let (abs_gap, rel_gap) = if status == MilpStatus::Optimal {
            (abs_gap.min(self.params.abs_gap), rel_gap.min(self.params.rel_gap))
        } else {
            (abs_gap, rel_gap)
        };
        MilpSolution {
            status,
            value,
            assignment,
            abs_gap,
            rel_gap,
            lower_bound,
            node_count: self.node_count,
            lp_iterations: self.simplex.pivot_count,
            ticks_used: self.budget.used,
            wall_secs,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::Sense;

    fn binary_min_x_above_half() -> MilpModel {
        let mut m = MilpModel::new("bin1");
        let x = m.add_binary("x");
        m.add_constraint("c0", vec![(x, 1.0)], Sense::Ge, 0.5);
        m.set_objective(vec![(x, 1.0)], 0.0);
        m
    }

    #[test]
    fn binary_rounds_up_to_one() {
        let sol = solve_bnb(&binary_min_x_above_half(), &BnbParams::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.value, Some(1.0));
        assert_eq!(sol.assignment.unwrap()[0], 1.0);
        assert!(sol.abs_gap <= 1e-9);
    }

    #[test]
    fn mixed_model_solves_exactly() {
        // min y + 2 b  s.t.  y + b >= 1.25, y in [0,1], b binary.
        // b=0 is infeasible (y <= 1), so b=1 and y=0.25: value 2.25.
        let mut m = MilpModel::new("mixed");
        let y = m.add_continuous("y", 0.0, 1.0);
        let b = m.add_binary("b");
        m.add_constraint("c0", vec![(y, 1.0), (b, 1.0)], Sense::Ge, 1.25);
        m.set_objective(vec![(y, 1.0), (b, 2.0)], 0.0);
        let sol = solve_bnb(&m, &BnbParams::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.value.unwrap() - 2.25).abs() < 1e-9);
    }

    #[test]
    fn infeasible_model_reports_infeasible() {
        let mut m = MilpModel::new("inf");
        let b = m.add_binary("b");
        m.add_constraint("c0", vec![(b, 1.0)], Sense::Ge, 2.0);
        m.set_objective(vec![(b, 1.0)], 0.0);
        let sol = solve_bnb(&m, &BnbParams::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Infeasible);
        assert!(sol.value.is_none());
    }

    #[test]
    fn unbounded_model_reports_unbounded() {
        let mut m = MilpModel::new("unb");
        let x = m.add_continuous("x", 0.0, f64::INFINITY);
        m.set_objective(vec![(x, -1.0)], 0.0);
        let sol = solve_bnb(&m, &BnbParams::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Unbounded);
    }

    #[test]
    fn warm_start_seeds_incumbent_and_short_circuits() {
        let m = binary_min_x_above_half();
        let params = BnbParams {
            warm_start: Some(vec![1.0]),
            ..BnbParams::default()
        };
        let sol = solve_bnb(&m, &params).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.value, Some(1.0));
    }

    #[test]
    fn infeasible_warm_start_is_rejected() {
        let mut m = MilpModel::new("ws");
        let b = m.add_binary("b");
        m.add_constraint("c0", vec![(b, 1.0)], Sense::Le, 0.2);
        m.set_objective(vec![(b, -1.0)], 0.0);
        // warm start b=1 violates the row; must be ignored, not adopted.
        let params = BnbParams {
            warm_start: Some(vec![1.0]),
            ..BnbParams::default()
        };
        let sol = solve_bnb(&m, &params).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.value, Some(0.0));
        assert_eq!(sol.assignment.unwrap()[0], 0.0);
    }

    #[test]
    fn node_limit_reports_time_limit_status() {
        // A model that needs branching.
        let mut m = MilpModel::new("lim");
        let a = m.add_binary("a");
        let b = m.add_binary("b");
        let c = m.add_binary("c");
        m.add_constraint("c0", vec![(a, 1.0), (b, 1.0), (c, 1.0)], Sense::Ge, 1.5);
        m.set_objective(vec![(a, 1.0), (b, 1.0625), (c, 1.125)], 0.0);
        let params = BnbParams {
            node_limit: 1,
            ..BnbParams::default()
        };
        let sol = solve_bnb(&m, &params).unwrap();
        assert_eq!(sol.status, MilpStatus::TimeLimitIncumbent);
        // Full run for reference.
        let full = solve_bnb(&m, &BnbParams::default()).unwrap();
        assert_eq!(full.status, MilpStatus::Optimal);
        assert_eq!(full.value, Some(2.0625));
    }

    #[test]
    fn runs_are_deterministic() {
        let mut m = MilpModel::new("det");
        let vars: Vec<usize> = (0..6).map(|i| m.add_binary(format!("b{i}"))).collect();
        let coeffs: Vec<(usize, f64)> = vars.iter().map(|&j| (j, 1.0)).collect();
        m.add_constraint("c0", coeffs, Sense::Ge, 2.5);
        m.add_constraint(
            "c1",
            vec![(vars[0], 1.0), (vars[1], 1.0)],
            Sense::Le,
            1.0,
        );
        let obj: Vec<(usize, f64)> = vars
            .iter()
            .enumerate()
            .map(|(i, &j)| (j, 1.0 + (i as f64) / 16.0))
            .collect();
        m.set_objective(obj, 0.0);
        let a = solve_bnb(&m, &BnbParams::default()).unwrap();
        let b = solve_bnb(&m, &BnbParams::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.value, b.value);
        assert_eq!(a.node_count, b.node_count);
        assert_eq!(a.lp_iterations, b.lp_iterations);
        assert_eq!(a.ticks_used, b.ticks_used);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn rounding_callback_supplies_incumbent() {
        // min sum b_i s.t. sum b_i >= 2.5; LP gives fractional 2.5/3 each.
        let mut m = MilpModel::new("round");
        let vars: Vec<usize> = (0..3).map(|i| m.add_binary(format!("b{i}"))).collect();
        let coeffs: Vec<(usize, f64)> = vars.iter().map(|&j| (j, 1.0)).collect();
        m.add_constraint("c0", coeffs.clone(), Sense::Ge, 2.5);
        m.set_objective(coeffs, 0.0);
        let mut calls = 0usize;
        let sol = solve_bnb_with_rounding(&m, &BnbParams::default(), |x| {
            calls += 1;
            // Round everything up: always feasible here.
            Some(x.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect())
        })
        .unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert_eq!(sol.value, Some(3.0));
        assert!(calls >= 1);
    }

    #[test]
    fn near_tolerance_dormant_row_does_not_discard_the_optimum() {
        // A dormant row whose violation at the cost-favorable parking
        // point sits between the unscaled verification tolerance (1e-6)
        // and the scaled pricing tolerance (1e-6 * (1 + |rhs|)): the
        // solver must activate the row and settle on the exactly
        // feasible vertex, not fathom the node on the uncertified point.
        let hi = 3.0 + 1e-6;
        let mut m = MilpModel::new("tight");
        let t = m.add_continuous("t", 0.0, hi);
        let b = m.add_binary("b");
        m.add_constraint("cap", vec![(t, 1.0), (b, -(hi - 3.0))], Sense::Le, 3.0);
        m.set_objective(vec![(t, -1.0), (b, 1.0)], 0.0);
        let params = BnbParams {
            rel_gap: 0.0,
            abs_gap: 0.0,
            ..BnbParams::default()
        };
        let sol = solve_bnb(&m, &params).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!(
            (sol.value.unwrap() - (-3.0)).abs() < 1e-9,
            "value {:?}",
            sol.value
        );
        let x = sol.assignment.as_ref().unwrap();
        assert_eq!(x[b], 0.0);
        assert!((x[t] - 3.0).abs() < 1e-9);
        assert!(m.max_violation(x) <= 1e-6);
    }

    #[test]
    fn pure_lp_model_needs_no_branching() {
        let mut m = MilpModel::new("lp");
        let x = m.add_continuous("x", 0.0, 4.0);
        m.add_constraint("c0", vec![(x, 1.0)], Sense::Ge, 1.5);
        m.set_objective(vec![(x, 2.0)], 1.0);
        let sol = solve_bnb(&m, &BnbParams::default()).unwrap();
        assert_eq!(sol.status, MilpStatus::Optimal);
        assert!((sol.value.unwrap() - 4.0).abs() < 1e-9);
        assert_eq!(sol.node_count, 1);
    }
}
