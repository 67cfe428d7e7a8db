//! Bounded-variable revised simplex over a sparse constraint store.
//!
//! Rows are held as equalities `a'x + s = rhs` with the slack bounded by
//! the row sense, so every column (structural, slack, artificial) is a
//! bounded variable and one pivot routine serves the whole solver. The
//! basis inverse is kept explicitly, column-major, which makes the hot
//! kernels (pricing, ftran, rank-one update, dual pivot row) contiguous
//! sweeps.
//!
//! Fresh solves run a two-phase primal: artificial columns absorb any
//! starting infeasibility, Dantzig pricing drives both phases, and a
//! Bland-rule restart clears degenerate stalls. Re-solves after bound
//! changes or row additions use the dual simplex, since those edits leave
//! reduced costs dual-feasible.
//!
//! Work is metered in integer ticks derived from the basis dimension, so
//! identical inputs consume identical budgets on every run.

use crate::error::Error;
use crate::Result;

use super::model::Sense;

const TOL_PIVOT: f64 = 1e-9;
const TOL_DJ: f64 = 1e-10;
const TOL_FEAS: f64 = 1e-9;
/// Consecutive non-improving iterations before switching to Bland's rule.
const STALL_LIMIT: u32 = 64;
/// Refactorize the basis inverse after this many pivots.
const REFACTOR_EVERY: u32 = 192;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VState {
    Basic(u32),
    AtLb,
    AtUb,
    /// Free variable parked at zero.
    FreeZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ColKind {
    Structural,
    Slack,
    Artificial,
}

pub(crate) struct Col {
    /// (working row, coefficient), at most one entry per row.
    entries: Vec<(u32, f64)>,
    pub cost: f64,
    pub lb: f64,
    pub ub: f64,
    pub kind: ColKind,
}

/// Outcome of one LP solve on the working problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpOutcome {
    Optimal,
    Infeasible,
    Unbounded,
    /// Tick budget exhausted mid-solve; state is consistent but not optimal.
    Aborted,
}

/// Deterministic work meter: ticks are integer functions of basis size,
/// never wall time.
pub(crate) struct TickBudget {
    pub used: u64,
    pub limit: u64,
}

impl TickBudget {
    pub fn unlimited() -> Self {
        TickBudget {
            used: 0,
            limit: u64::MAX,
        }
    }

    pub fn with_limit(limit: u64) -> Self {
        TickBudget { used: 0, limit }
    }

    fn charge(&mut self, amount: u64) {
        self.used = self.used.saturating_add(amount);
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.limit
    }
}

/// Cost of one simplex iteration at basis dimension m, in ticks.
fn iter_ticks(m: usize) -> u64 {
    let m = m as u64;
    (m * m) / 16 + m + 8
}

pub(crate) struct Simplex {
    m: usize,
    rhs: Vec<f64>,
    pub cols: Vec<Col>,
    basis: Vec<u32>,
    state: Vec<VState>,
    pub x: Vec<f64>,
    /// Column-major basis inverse: entry (r, i) of B^-1 lives at
    /// binv[i * stride + r], so column i is contiguous.
    binv: Vec<f64>,
    stride: usize,
    pivots_since_refactor: u32,
    pub pivot_count: u64,
}

impl Simplex {
    pub fn new() -> Self {
        Simplex {
            m: 0,
            rhs: Vec::new(),
            cols: Vec::new(),
            basis: Vec::new(),
            state: Vec::new(),
            x: Vec::new(),
            binv: Vec::new(),
            stride: 0,
            pivots_since_refactor: 0,
            pivot_count: 0,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    /// Add a structural column, nonbasic at a bound (free columns park at
    /// zero). Entries may only reference existing rows.
    pub fn add_structural(
        &mut self,
        entries: Vec<(u32, f64)>,
        cost: f64,
        lb: f64,
        ub: f64,
        at_upper: bool,
    ) -> usize {
        debug_assert!(entries.iter().all(|&(r, _)| (r as usize) < self.m));
        let (state, value) = initial_state(lb, ub, at_upper);
        self.cols.push(Col {
            entries,
            cost,
            lb,
            ub,
            kind: ColKind::Structural,
        });
        self.state.push(state);
        self.x.push(value);
        self.cols.len() - 1
    }

    /// Append a constraint row over existing structural columns. Its slack
    /// enters the basis; the basic slack value may start outside its
    /// bounds, to be repaired by the next primal or dual solve. Returns
    /// the slack's column index.
    pub fn add_row(&mut self, coeffs: &[(usize, f64)], sense: Sense, rhs: f64) -> usize {
        let row = self.m;
        self.grow_binv_for_new_row(coeffs);
        for &(j, c) in coeffs {
            debug_assert!(j < self.cols.len() && self.cols[j].kind == ColKind::Structural);
            self.cols[j].entries.push((row as u32, c));
        }
        let (slb, sub) = match sense {
            Sense::Le => (0.0, f64::INFINITY),
            Sense::Ge => (f64::NEG_INFINITY, 0.0),
            Sense::Eq => (0.0, 0.0),
        };
        self.m += 1;
        self.rhs.push(rhs);
        let slack = self.cols.len();
        self.cols.push(Col {
            entries: vec![(row as u32, 1.0)],
            cost: 0.0,
            lb: slb,
            ub: sub,
            kind: ColKind::Slack,
        });
        self.basis.push(slack as u32);
        self.state.push(VState::Basic(row as u32));
        // Slack value keeps the new row an equality at the current point.
        let act: f64 = coeffs.iter().map(|&(j, c)| c * self.x[j]).sum();
        self.x.push(rhs - act);
        slack
    }

    /// Extend the basis inverse for a new row whose slack will be basic:
    /// the new inverse row is (-a_B' B^-1 | 1) where a_B holds the new
    /// row's coefficients on the current basic columns.
    fn grow_binv_for_new_row(&mut self, coeffs: &[(usize, f64)]) {
        let m = self.m;
        if m + 1 > self.stride {
            let new_stride = (m + 1).max(self.stride * 3 / 2).max(16);
            let mut nb = vec![0.0; new_stride * new_stride];
            for i in 0..m {
                nb[i * new_stride..i * new_stride + m]
                    .copy_from_slice(&self.binv[i * self.stride..i * self.stride + m]);
            }
            self.binv = nb;
            self.stride = new_stride;
        }
        let mut a_b = vec![0.0; m];
        let mut any = false;
        for &(j, c) in coeffs {
            if let VState::Basic(r) = self.state[j] {
                a_b[r as usize] += c;
                any = true;
            }
        }
        for i in 0..m {
            let w = if any {
                let col = &self.binv[i * self.stride..i * self.stride + m];
                let mut acc = 0.0;
                for r in 0..m {
                    acc += a_b[r] * col[r];
                }
                acc
            } else {
                0.0
            };
            self.binv[i * self.stride + m] = -w;
        }
        for r in 0..m {
            self.binv[m * self.stride + r] = 0.0;
        }
        self.binv[m * self.stride + m] = 1.0;
    }

    /// Tighten or relax a column's bounds. Nonbasic columns sitting on a
    /// moved bound follow it; basic values are left for the next solve.
    pub fn set_bounds(&mut self, j: usize, lb: f64, ub: f64) {
        debug_assert!(lb <= ub);
        let old = self.x[j];
        self.cols[j].lb = lb;
        self.cols[j].ub = ub;
        match self.state[j] {
            VState::Basic(_) => {}
            VState::AtLb | VState::AtUb | VState::FreeZero => {
                let prefer_ub = matches!(self.state[j], VState::AtUb);
                let (st, val) = if prefer_ub && ub.is_finite() {
                    (VState::AtUb, ub)
                } else {
                    initial_state(lb, ub, prefer_ub)
                };
                self.state[j] = st;
                self.x[j] = val;
            }
        }
        let delta = self.x[j] - old;
        if delta != 0.0 && !matches!(self.state[j], VState::Basic(_)) {
            let alpha = self.ftran(j);
            for r in 0..self.m {
                if alpha[r] != 0.0 {
                    let b = self.basis[r] as usize;
                    self.x[b] -= delta * alpha[r];
                }
            }
        }
    }

    /// B^-1 a_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(row, v) in &self.cols[j].entries {
            let col = &self.binv[row as usize * self.stride..row as usize * self.stride + m];
            for r in 0..m {
                alpha[r] += v * col[r];
            }
        }
        alpha
    }

    /// Dual prices y = c_B' B^-1 for the active cost vector.
    fn btran_costs(&self, phase1: bool) -> Vec<f64> {
        let m = self.m;
        let mut cb = vec![0.0; m];
        for r in 0..m {
            cb[r] = self.active_cost(self.basis[r] as usize, phase1);
        }
        let mut y = vec![0.0; m];
        for i in 0..m {
            let col = &self.binv[i * self.stride..i * self.stride + m];
            let mut acc = 0.0;
            for r in 0..m {
                acc += cb[r] * col[r];
            }
            y[i] = acc;
        }
        y
    }

    fn active_cost(&self, j: usize, phase1: bool) -> f64 {
        if phase1 {
            match self.cols[j].kind {
                ColKind::Artificial => 1.0,
                _ => 0.0,
            }
        } else {
            self.cols[j].cost
        }
    }

    fn reduced_cost(&self, j: usize, y: &[f64], phase1: bool) -> f64 {
        let mut d = self.active_cost(j, phase1);
        for &(row, v) in &self.cols[j].entries {
            d -= y[row as usize] * v;
        }
        d
    }

    fn active_objective(&self, phase1: bool) -> f64 {
        let mut z = 0.0;
        for j in 0..self.cols.len() {
            let c = self.active_cost(j, phase1);
            if c != 0.0 {
                z += c * self.x[j];
            }
        }
        z
    }

    /// Objective of the current point under the real costs (no offset).
    pub fn objective(&self) -> f64 {
        self.active_objective(false)
    }

    /// Rank-one update of the inverse for a pivot on (row r, column with
    /// ftran image `alpha`), plus basis bookkeeping. Values of x are the
    /// caller's responsibility.
    fn update_basis(&mut self, r: usize, enter: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for i in 0..m {
            let col = &mut self.binv[i * self.stride..i * self.stride + m];
            let br = col[r] / piv;
            if br != 0.0 {
                for (rr, a) in alpha.iter().enumerate() {
                    if rr != r && *a != 0.0 {
                        col[rr] -= a * br;
                    }
                }
            }
            col[r] = br;
        }
        self.basis[r] = enter as u32;
        self.state[enter] = VState::Basic(r as u32);
        self.pivots_since_refactor += 1;
        self.pivot_count += 1;
    }

    /// Two-phase primal solve from the current state.
    pub fn primal_solve(&mut self, budget: &mut TickBudget) -> Result<LpOutcome> {
        if self.repair_with_artificials() {
            match self.run_phase(true, budget)? {
                LpOutcome::Optimal => {}
                LpOutcome::Aborted => return Ok(LpOutcome::Aborted),
                LpOutcome::Unbounded | LpOutcome::Infeasible => {
                    return Err(Error::Numerical(
                        "phase-1 objective cannot be unbounded".into(),
                    ))
                }
            }
            let infeas: f64 = self
                .cols
                .iter()
                .zip(&self.x)
                .filter(|(c, _)| c.kind == ColKind::Artificial)
                .map(|(_, &v)| v.abs())
                .sum();
            if infeas > 1e-7 {
                return Ok(LpOutcome::Infeasible);
            }
            self.retire_artificials();
        }
        self.run_phase(false, budget)
    }

    /// One primal phase under phase-1 or real costs.
    fn run_phase(&mut self, phase1: bool, budget: &mut TickBudget) -> Result<LpOutcome> {
        let mut stall = 0u32;
        let mut bland_left = 0u32;
        let mut last_obj = f64::INFINITY;
        loop {
            if budget.exhausted() {
                return Ok(LpOutcome::Aborted);
            }
            budget.charge(iter_ticks(self.m));
            let bland = bland_left > 0;
            let y = self.btran_costs(phase1);
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                if matches!(self.state[j], VState::Basic(_)) {
                    continue;
                }
                if self.cols[j].kind == ColKind::Artificial && !phase1 {
                    continue;
                }
                let d = self.reduced_cost(j, &y, phase1);
                let eligible = match self.state[j] {
                    VState::AtLb => d < -TOL_DJ,
                    VState::AtUb => d > TOL_DJ,
                    VState::FreeZero => d.abs() > TOL_DJ,
                    VState::Basic(_) => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    enter = Some((j, d));
                    break;
                }
                if enter.map_or(true, |(_, bd)| d.abs() > bd.abs()) {
                    enter = Some((j, d));
                }
            }
            let Some((j, dj)) = enter else {
                self.maybe_refactor(true)?;
                return Ok(LpOutcome::Optimal);
            };
            let dir = match self.state[j] {
                VState::AtLb => 1.0,
                VState::AtUb => -1.0,
                VState::FreeZero => {
                    if dj < 0.0 {
                        1.0
                    } else {
                        -1.0
                    }
                }
                VState::Basic(_) => unreachable!(),
            };
            let alpha = self.ftran(j);
            // Ratio test: entering moves t >= 0 along dir; basic values
            // change at rate -dir * alpha_r.
            let range = self.cols[j].ub - self.cols[j].lb;
            let mut t_best = if range.is_finite() {
                range
            } else {
                f64::INFINITY
            };
            let mut leave: Option<(usize, f64, bool)> = None; // (row, |alpha|, to_lb)
            for r in 0..self.m {
                let rate = -dir * alpha[r];
                if rate.abs() <= TOL_PIVOT {
                    continue;
                }
                let b = self.basis[r] as usize;
                let (lb, ub) = (self.cols[b].lb, self.cols[b].ub);
                let (limit, to_lb) = if rate < 0.0 {
                    if lb.is_finite() {
                        (((self.x[b] - lb) / -rate).max(0.0), true)
                    } else {
                        continue;
                    }
                } else if ub.is_finite() {
                    (((ub - self.x[b]) / rate).max(0.0), false)
                } else {
                    continue;
                };
                let take = if limit < t_best - 1e-12 {
                    true
                } else if limit <= t_best + 1e-12 {
                    match leave {
                        None => limit <= t_best,
                        Some((lr, la, _)) => {
                            if bland {
                                (self.basis[r] as usize) < (self.basis[lr] as usize)
                            } else {
                                alpha[r].abs() > la
                            }
                        }
                    }
                } else {
                    false
                };
                if take {
                    t_best = t_best.min(limit);
                    leave = Some((r, alpha[r].abs(), to_lb));
                }
            }
            if t_best.is_infinite() {
                return if phase1 {
                    Err(Error::Numerical(
                        "phase-1 ratio test reported an unbounded direction".into(),
                    ))
                } else {
                    Ok(LpOutcome::Unbounded)
                };
            }
            let t = dir * t_best;
            match leave {
                None => {
                    // Bound flip: entering crosses to its opposite bound.
                    for r in 0..self.m {
                        if alpha[r] != 0.0 {
                            let b = self.basis[r] as usize;
                            self.x[b] -= t * alpha[r];
                        }
                    }
                    self.x[j] = if dir > 0.0 {
                        self.cols[j].ub
                    } else {
                        self.cols[j].lb
                    };
                    self.state[j] = if dir > 0.0 { VState::AtUb } else { VState::AtLb };
                }
                Some((r, _, to_lb)) => {
                    let leave_col = self.basis[r] as usize;
                    for i in 0..self.m {
                        if alpha[i] != 0.0 {
                            let b = self.basis[i] as usize;
                            self.x[b] -= t * alpha[i];
                        }
                    }
                    self.x[j] += t;
                    // Pin the leaving variable exactly on its bound.
                    self.x[leave_col] = if to_lb {
                        self.cols[leave_col].lb
                    } else {
                        self.cols[leave_col].ub
                    };
                    self.state[leave_col] = if to_lb { VState::AtLb } else { VState::AtUb };
                    self.update_basis(r, j, &alpha);
                    self.maybe_refactor(false)?;
                }
            }
            // Stall bookkeeping on the active objective.
            let obj = self.active_objective(phase1);
            if obj < last_obj - 1e-12 * (1.0 + last_obj.abs()) {
                stall = 0;
                bland_left = 0;
            } else if bland {
                bland_left -= 1;
                if bland_left == 0 {
                    return Err(Error::Numerical("simplex stalled under Bland's rule".into()));
                }
            } else {
                stall += 1;
                if stall >= STALL_LIMIT {
                    bland_left = 8 * (self.m as u32 + self.cols.len() as u32) + 64;
                    stall = 0;
                }
            }
            last_obj = obj;
        }
    }

    /// Dual simplex from a dual-feasible basis (the state after bound
    /// edits or row additions at a previous optimum). Falls back to the
    /// two-phase primal if the start is not dual-feasible.
    pub fn dual_solve(&mut self, budget: &mut TickBudget) -> Result<LpOutcome> {
        if !self.dual_feasible() {
            return self.primal_solve(budget);
        }
        let mut iters = 0u32;
        let mut bland = false;
        let mut polished = false;
        loop {
            if budget.exhausted() {
                return Ok(LpOutcome::Aborted);
            }
            let Some(r) = self.most_infeasible_row(bland) else {
                if polished {
                    return Ok(LpOutcome::Optimal);
                }
                // Refresh the factorization once and re-check before
                // declaring optimality.
                self.refactor()?;
                polished = true;
                continue;
            };
            polished = false;
            budget.charge(iter_ticks(self.m));
            let leave = self.basis[r] as usize;
            let below = self.x[leave] < self.cols[leave].lb;
            let m = self.m;
            // Dual pivot row e_r' B^-1, then its product with each column.
            let mut omega = vec![0.0; m];
            for i in 0..m {
                omega[i] = self.binv[i * self.stride + r];
            }
            let y = self.btran_costs(false);
            let mut best: Option<(usize, f64, f64)> = None; // (col, ratio, |alpha|)
            for j in 0..self.cols.len() {
                if matches!(self.state[j], VState::Basic(_))
                    || self.cols[j].kind == ColKind::Artificial
                {
                    continue;
                }
                let mut a_rj = 0.0;
                for &(row, v) in &self.cols[j].entries {
                    a_rj += omega[row as usize] * v;
                }
                if a_rj.abs() <= TOL_PIVOT {
                    continue;
                }
                let eligible = match (below, self.state[j]) {
                    (true, VState::AtLb) => a_rj < 0.0,
                    (true, VState::AtUb) => a_rj > 0.0,
                    (false, VState::AtLb) => a_rj > 0.0,
                    (false, VState::AtUb) => a_rj < 0.0,
                    (_, VState::FreeZero) => true,
                    (_, VState::Basic(_)) => false,
                };
                if !eligible {
                    continue;
                }
                let d = self.reduced_cost(j, &y, false);
                let ratio = (d / a_rj).abs();
                let take = match best {
                    None => true,
                    Some((bj, br, ba)) => {
                        if bland {
                            j < bj
                        } else {
                            ratio < br - 1e-12 || ((ratio - br).abs() <= 1e-12 && a_rj.abs() > ba)
                        }
                    }
                };
                if take {
                    best = Some((j, ratio, a_rj.abs()));
                }
            }
            let Some((enter, _, _)) = best else {
                return Ok(LpOutcome::Infeasible);
            };
            let target = if below {
                self.cols[leave].lb
            } else {
                self.cols[leave].ub
            };
            let alpha = self.ftran(enter);
            let a_re = alpha[r];
            if a_re.abs() <= TOL_PIVOT * 0.1 {
                self.refactor()?;
                iters += 1;
                if iters > 4 * (self.m as u32 + self.cols.len() as u32) + 64 {
                    return Err(Error::Numerical("dual simplex stalled".into()));
                }
                continue;
            }
            // Entering move that lands the leaving variable on `target`.
            let delta = (self.x[leave] - target) / a_re;
            for i in 0..m {
                if alpha[i] != 0.0 {
                    let b = self.basis[i] as usize;
                    self.x[b] -= delta * alpha[i];
                }
            }
            self.x[enter] += delta;
            self.x[leave] = target;
            self.state[leave] = if below { VState::AtLb } else { VState::AtUb };
            self.update_basis(r, enter, &alpha);
            self.maybe_refactor(false)?;
            iters += 1;
            if iters > 4 * (self.m as u32 + self.cols.len() as u32) + 64 {
                if bland {
                    return Err(Error::Numerical("dual simplex stalled".into()));
                }
                bland = true;
                iters = 0;
            }
        }
    }

    fn dual_feasible(&self) -> bool {
        let y = self.btran_costs(false);
        for j in 0..self.cols.len() {
            if matches!(self.state[j], VState::Basic(_)) || self.cols[j].kind == ColKind::Artificial
            {
                continue;
            }
            let d = self.reduced_cost(j, &y, false);
            let bad = match self.state[j] {
                VState::AtLb => d < -1e-7,
                VState::AtUb => d > 1e-7,
                VState::FreeZero => d.abs() > 1e-7,
                VState::Basic(_) => false,
            };
            if bad {
                return false;
            }
        }
        true
    }

    fn most_infeasible_row(&self, bland: bool) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..self.m {
            let j = self.basis[r] as usize;
            let c = &self.cols[j];
            let viol = (c.lb - self.x[j]).max(self.x[j] - c.ub);
            let tol = TOL_FEAS * (1.0 + self.x[j].abs());
            if viol > tol {
                if bland {
                    return Some(r);
                }
                if best.map_or(true, |(_, bv)| viol > bv) {
                    best = Some((r, viol));
                }
            }
        }
        best.map(|(r, _)| r)
    }

    fn maybe_refactor(&mut self, force: bool) -> Result<()> {
        if force || self.pivots_since_refactor >= REFACTOR_EVERY {
            self.refactor()?;
        }
        Ok(())
    }

    /// Rebuild the basis inverse and basic values from scratch.
    pub fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        self.pivots_since_refactor = 0;
        if m == 0 {
            return Ok(());
        }
        // Dense basis matrix, column-major: storage column r is basic
        // column r over working rows.
        let mut b = vec![0.0; m * m];
        for (r, &bj) in self.basis.iter().enumerate() {
            for &(row, v) in &self.cols[bj as usize].entries {
                b[r * m + row as usize] += v;
            }
        }
        // Gauss-Jordan with partial pivoting on [B | I]; element (row i,
        // col k) of either matrix sits at [k * m + i].
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = 0.0;
            for r in k..m {
                let v = b[k * m + r].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val < 1e-12 {
                self.repair_singular_basis()?;
                return self.refactor();
            }
            if piv_row != k {
                for c in 0..m {
                    b.swap(c * m + k, c * m + piv_row);
                    inv.swap(c * m + k, c * m + piv_row);
                }
            }
            let d = b[k * m + k];
            for c in 0..m {
                b[c * m + k] /= d;
                inv[c * m + k] /= d;
            }
            for r in 0..m {
                if r != k {
                    let f = b[k * m + r];
                    if f != 0.0 {
                        for c in 0..m {
                            b[c * m + r] -= f * b[c * m + k];
                            inv[c * m + r] -= f * inv[c * m + k];
                        }
                    }
                }
            }
        }
        if self.stride < m {
            self.stride = m.max(16);
            self.binv = vec![0.0; self.stride * self.stride];
        }
        for i in 0..m {
            for r in 0..m {
                self.binv[i * self.stride + r] = inv[i * m + r];
            }
        }
        self.recompute_basics();
        Ok(())
    }

    /// Replace basis columns that no longer span the row space with row
    /// slacks. Rare; runs only when refactorization meets singularity.
    fn repair_singular_basis(&mut self) -> Result<()> {
        let m = self.m;
        let mut covered = vec![false; m];
        let mut seated: Vec<Option<u32>> = vec![None; m];
        let old_basis = self.basis.clone();
        for &bj in &old_basis {
            let j = bj as usize;
            let mut best: Option<(usize, f64)> = None;
            for &(row, v) in &self.cols[j].entries {
                if !covered[row as usize] {
                    let better = best.map_or(true, |(_, bv): (usize, f64)| v.abs() > bv.abs());
                    if better {
                        best = Some((row as usize, v));
                    }
                }
            }
            match best {
                Some((row, v)) if v.abs() > 1e-10 => {
                    covered[row] = true;
                    seated[row] = Some(bj);
                }
                _ => {
                    let c = &self.cols[j];
                    let (st, val) = nearest_bound_state(c.lb, c.ub, self.x[j]);
                    self.state[j] = st;
                    self.x[j] = val;
                }
            }
        }
        for row in 0..m {
            let j = match seated[row] {
                Some(j) => j as usize,
                None => self
                    .cols
                    .iter()
                    .position(|c| {
                        c.kind != ColKind::Structural
                            && c.entries.len() == 1
                            && c.entries[0].0 as usize == row
                            && c.entries[0].1 > 0.0
                    })
                    .ok_or_else(|| Error::Numerical("basis repair found no slack".into()))?,
            };
            self.basis[row] = j as u32;
            self.state[j] = VState::Basic(row as u32);
        }
        Ok(())
    }

    /// x_B = B^-1 (rhs - N x_N).
    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut v = self.rhs.clone();
        for j in 0..self.cols.len() {
            if matches!(self.state[j], VState::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for &(row, c) in &self.cols[j].entries {
                v[row as usize] -= c * self.x[j];
            }
        }
        let mut xb = vec![0.0; m];
        for i in 0..m {
            if v[i] != 0.0 {
                let col = &self.binv[i * self.stride..i * self.stride + m];
                for r in 0..m {
                    xb[r] += v[i] * col[r];
                }
            }
        }
        for r in 0..m {
            self.x[self.basis[r] as usize] = xb[r];
        }
    }

    /// Introduce artificial columns that absorb any basic bound violation,
    /// leaving a primal-feasible phase-1 start. Returns whether any were
    /// needed. The artificial for basis row r is the basic column itself
    /// (sign-adjusted), so B only changes by a column scale, and the
    /// inverse is patched by negating one row.
    fn repair_with_artificials(&mut self) -> bool {
        self.recompute_basics();
        let mut any = false;
        for r in 0..self.m {
            let j = self.basis[r] as usize;
            let (lb, ub, val) = (self.cols[j].lb, self.cols[j].ub, self.x[j]);
            let tol = TOL_FEAS * (1.0 + val.abs());
            if val >= lb - tol && val <= ub + tol {
                continue;
            }
            let target = if val < lb { lb } else { ub };
            let residual = val - target;
            let sign = if residual >= 0.0 { 1.0 } else { -1.0 };
            let entries: Vec<(u32, f64)> = self.cols[j]
                .entries
                .iter()
                .map(|&(row, v)| (row, v * sign))
                .collect();
            self.cols.push(Col {
                entries,
                cost: 0.0,
                lb: 0.0,
                ub: f64::INFINITY,
                kind: ColKind::Artificial,
            });
            let art = self.cols.len() - 1;
            self.state.push(VState::Basic(r as u32));
            self.x.push(residual.abs());
            self.x[j] = target;
            self.state[j] = if residual < 0.0 { VState::AtLb } else { VState::AtUb };
            self.basis[r] = art as u32;
            if sign < 0.0 {
                for i in 0..self.m {
                    self.binv[i * self.stride + r] = -self.binv[i * self.stride + r];
                }
            }
            any = true;
        }
        any
    }

    /// After phase 1, freeze artificial columns at zero so they can never
    /// re-enter with a nonzero value.
    fn retire_artificials(&mut self) {
        for j in 0..self.cols.len() {
            if self.cols[j].kind == ColKind::Artificial {
                self.cols[j].ub = 0.0;
                if !matches!(self.state[j], VState::Basic(_)) {
                    self.state[j] = VState::AtLb;
                    self.x[j] = 0.0;
                }
            }
        }
    }

    /// Largest scaled bound or row-equality violation at the current point.
    pub fn feasibility_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (c, &v) in self.cols.iter().zip(&self.x) {
            let scale = 1.0 + v.abs();
            if c.lb.is_finite() {
                worst = worst.max((c.lb - v) / scale);
            }
            if c.ub.is_finite() {
                worst = worst.max((v - c.ub) / scale);
            }
        }
        let mut act = vec![0.0; self.m];
        for (c, &v) in self.cols.iter().zip(&self.x) {
            if v != 0.0 {
                for &(row, coef) in &c.entries {
                    act[row as usize] += coef * v;
                }
            }
        }
        for r in 0..self.m {
            let scale = 1.0 + self.rhs[r].abs();
            worst = worst.max((act[r] - self.rhs[r]).abs() / scale);
        }
        worst
    }

    /// Dual prices for the real costs, one per working row.
    pub fn duals(&self) -> Vec<f64> {
        self.btran_costs(false)
    }
}

fn initial_state(lb: f64, ub: f64, at_upper: bool) -> (VState, f64) {
    if at_upper && ub.is_finite() {
        (VState::AtUb, ub)
    } else if lb.is_finite() {
        (VState::AtLb, lb)
    } else if ub.is_finite() {
        (VState::AtUb, ub)
    } else {
        (VState::FreeZero, 0.0)
    }
}

fn nearest_bound_state(lb: f64, ub: f64, val: f64) -> (VState, f64) {
    if lb.is_finite() && (!ub.is_finite() || (val - lb).abs() <= (ub - val).abs()) {
        (VState::AtLb, lb)
    } else if ub.is_finite() {
        (VState::AtUb, ub)
    } else {
        (VState::FreeZero, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_simple(
        cols: &[(f64, f64, f64)], // (cost, lb, ub)
        rows: &[(&[(usize, f64)], Sense, f64)],
    ) -> (LpOutcome, Vec<f64>, f64) {
        let mut s = Simplex::new();
        for &(cost, lb, ub) in cols {
            s.add_structural(Vec::new(), cost, lb, ub, false);
        }
        for (coeffs, sense, rhs) in rows {
            s.add_row(coeffs, *sense, *rhs);
        }
        let mut budget = TickBudget::unlimited();
        let out = s.primal_solve(&mut budget).unwrap();
        let x = (0..cols.len()).map(|j| s.x[j]).collect();
        let obj = s.objective();
        (out, x, obj)
    }

    #[test]
    fn min_x_above_half_gives_half() {
        let (out, x, obj) = solve_simple(
            &[(1.0, 0.0, 1.0)],
            &[(&[(0, 1.0)], Sense::Ge, 0.5)],
        );
        assert_eq!(out, LpOutcome::Optimal);
        assert!((x[0] - 0.5).abs() < 1e-9);
        assert!((obj - 0.5).abs() < 1e-9);
    }

    #[test]
    fn packing_two_vars_fills_budget() {
        let (out, _, obj) = solve_simple(
            &[(-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0)],
            &[(&[(0, 1.0), (1, 1.0)], Sense::Le, 1.0)],
        );
        assert_eq!(out, LpOutcome::Optimal);
        assert!((obj - (-1.0)).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_rows() {
        let (out, _, _) = solve_simple(
            &[(1.0, 0.0, 1.0)],
            &[
                (&[(0, 1.0)], Sense::Ge, 0.8),
                (&[(0, 1.0)], Sense::Le, 0.2),
            ],
        );
        assert_eq!(out, LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded_direction() {
        let (out, _, _) = solve_simple(
            &[(-1.0, 0.0, f64::INFINITY)],
            &[(&[(0, -1.0)], Sense::Le, 1.0)],
        );
        assert_eq!(out, LpOutcome::Unbounded);
    }

    #[test]
    fn equality_row_is_honored() {
        let (out, x, obj) = solve_simple(
            &[(1.0, 0.0, 5.0), (2.0, 0.0, 5.0)],
            &[(&[(0, 1.0), (1, 1.0)], Sense::Eq, 3.0)],
        );
        assert_eq!(out, LpOutcome::Optimal);
        assert!((x[0] - 3.0).abs() < 1e-9);
        assert!((x[1]).abs() < 1e-9);
        assert!((obj - 3.0).abs() < 1e-9);
    }

    #[test]
    fn bound_flip_reaches_optimum_without_pivot() {
        // max x (min -x) with only an upper bound: pure flip.
        let (out, x, _) = solve_simple(&[(-1.0, 0.0, 2.5)], &[]);
        assert_eq!(out, LpOutcome::Optimal);
        assert!((x[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn negative_lower_bounds_work() {
        let (out, x, obj) = solve_simple(
            &[(1.0, -3.0, 3.0), (1.0, -3.0, 3.0)],
            &[(&[(0, 1.0), (1, 2.0)], Sense::Ge, -2.0)],
        );
        assert_eq!(out, LpOutcome::Optimal);
        // x0 drops to its lower bound; the row is then satisfied through
        // x1, which covers activity at half the objective price.
        assert!((obj - (-2.5)).abs() < 1e-8, "obj {obj} x {x:?}");
        assert!((x[0] - (-3.0)).abs() < 1e-9);
        assert!((x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn dual_resolve_after_bound_tightening() {
        let mut s = Simplex::new();
        let x0 = s.add_structural(Vec::new(), -1.0, 0.0, 1.0, false);
        let x1 = s.add_structural(Vec::new(), -0.6, 0.0, 1.0, false);
        s.add_row(&[(x0, 1.0), (x1, 1.0)], Sense::Le, 1.2);
        let mut budget = TickBudget::unlimited();
        assert_eq!(s.primal_solve(&mut budget).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - (-1.12)).abs() < 1e-9);
        // Branch-style fixing x0 = 0 and re-solving dually.
        s.set_bounds(x0, 0.0, 0.0);
        assert_eq!(s.dual_solve(&mut budget).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - (-0.6)).abs() < 1e-9);
        assert!(s.x[x0].abs() < 1e-12);
        assert!((s.x[x1] - 1.0).abs() < 1e-9);
        // Relax back and fix to one instead.
        s.set_bounds(x0, 1.0, 1.0);
        assert_eq!(s.dual_solve(&mut budget).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - (-1.12)).abs() < 1e-9);
    }

    #[test]
    fn lazy_row_addition_resolves_dually() {
        let mut s = Simplex::new();
        let x0 = s.add_structural(Vec::new(), -1.0, 0.0, 10.0, false);
        let x1 = s.add_structural(Vec::new(), -1.0, 0.0, 10.0, false);
        let mut budget = TickBudget::unlimited();
        assert_eq!(s.primal_solve(&mut budget).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - (-20.0)).abs() < 1e-9);
        // A violated row arrives; the dual simplex restores feasibility.
        s.add_row(&[(x0, 1.0), (x1, 1.0)], Sense::Le, 3.0);
        assert_eq!(s.dual_solve(&mut budget).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - (-3.0)).abs() < 1e-9);
        s.add_row(&[(x0, 1.0)], Sense::Le, 1.0);
        assert_eq!(s.dual_solve(&mut budget).unwrap(), LpOutcome::Optimal);
        assert!((s.objective() - (-3.0)).abs() < 1e-9);
        assert!(s.feasibility_residual() <= 1e-9);
    }

    #[test]
    fn budget_abort_is_clean() {
        let mut s = Simplex::new();
        for _ in 0..4 {
            s.add_structural(Vec::new(), -1.0, 0.0, 1.0, false);
        }
        s.add_row(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], Sense::Le, 2.0);
        let mut budget = TickBudget::with_limit(1);
        let out = s.primal_solve(&mut budget).unwrap();
        assert_eq!(out, LpOutcome::Aborted);
    }

    #[test]
    fn degenerate_rows_still_terminate() {
        // Several redundant rows through the same vertex.
        let rows: Vec<(Vec<(usize, f64)>, Sense, f64)> = vec![
            (vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0),
            (vec![(0, 2.0), (1, 2.0)], Sense::Le, 2.0),
            (vec![(0, 1.0)], Sense::Le, 1.0),
            (vec![(1, 1.0)], Sense::Le, 1.0),
            (vec![(0, 3.0), (1, 3.0)], Sense::Le, 3.0),
        ];
        let borrowed: Vec<(&[(usize, f64)], Sense, f64)> = rows
            .iter()
            .map(|(c, s, r)| (c.as_slice(), *s, *r))
            .collect();
        let (out, _, obj) = solve_simple(&[(-1.0, 0.0, 1.0), (-1.0, 0.0, 1.0)], &borrowed);
        assert_eq!(out, LpOutcome::Optimal);
        assert!((obj - (-1.0)).abs() < 1e-8);
    }

    #[test]
    fn residual_stays_scaled_small() {
        let (out, _, _) = solve_simple(
            &[(1.0, 0.0, 1e6), (-2.0, 0.0, 1e6)],
            &[
                (&[(0, 1.0), (1, 1.0)], Sense::Le, 1e6),
                (&[(0, 1.0), (1, -1.0)], Sense::Ge, -5e5),
            ],
        );
        assert_eq!(out, LpOutcome::Optimal);
    }
}
