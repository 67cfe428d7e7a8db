//! Independent oracles for the LP and branch-and-bound engines.
//!
//! Nothing here touches the simplex: continuous problems are checked
//! against brute-force vertex enumeration (every candidate active set,
//! solved by a local Gaussian elimination), and integer problems against
//! complete enumeration of the binary hypercube. Test data uses dyadic
//! coefficients (multiples of 1/64) where exact value equality is
//! asserted, because dyadic sums of this size are exact in f64.

use seqdesign::milp::{
    lp_solve, solve_bnb, BnbParams, LpStatus, MilpModel, MilpStatus, Sense,
};
use seqdesign::sampling::{Hypothesis, PathRng, StreamClass};

// ---------------------------------------------------------------------
// Oracle-side linear algebra (deliberately separate from the solver).
// ---------------------------------------------------------------------

/// Solve a dense square system by Gaussian elimination with partial
/// pivoting. Returns None when the matrix is numerically singular.
fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().cloned().collect();
    let mut rhs = b.to_vec();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col] / m[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

/// Dense copy of a model's row data for oracle-side checks.
struct DenseLp {
    a: Vec<Vec<f64>>,
    senses: Vec<Sense>,
    rhs: Vec<f64>,
    lb: Vec<f64>,
    ub: Vec<f64>,
    cost: Vec<f64>,
    offset: f64,
}

impl DenseLp {
    fn from_model(model: &MilpModel) -> DenseLp {
        let n = model.num_vars();
        let mut a = vec![vec![0.0; n]; model.num_constraints()];
        for (r, con) in model.constraints.iter().enumerate() {
            for &(j, c) in &con.coeffs {
                a[r][j] = c;
            }
        }
        let mut cost = vec![0.0; n];
        for &(j, c) in &model.objective {
            cost[j] = c;
        }
        DenseLp {
            a,
            senses: model.constraints.iter().map(|c| c.sense).collect(),
            rhs: model.constraints.iter().map(|c| c.rhs).collect(),
            lb: model.variables.iter().map(|v| v.lb).collect(),
            ub: model.variables.iter().map(|v| v.ub).collect(),
            cost,
            offset: model.objective_offset,
        }
    }

    fn feasible(&self, x: &[f64], tol: f64) -> bool {
        for j in 0..x.len() {
            if x[j] < self.lb[j] - tol || x[j] > self.ub[j] + tol {
                return false;
            }
        }
        for r in 0..self.a.len() {
            let act: f64 = (0..x.len()).map(|j| self.a[r][j] * x[j]).sum();
            let ok = match self.senses[r] {
                Sense::Le => act <= self.rhs[r] + tol,
                Sense::Ge => act >= self.rhs[r] - tol,
                Sense::Eq => (act - self.rhs[r]).abs() <= tol,
            };
            if !ok {
                return false;
            }
        }
        true
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.offset + (0..x.len()).map(|j| self.cost[j] * x[j]).sum::<f64>()
    }
}

/// Next k-subset of {0..n} in lexicographic order, or None when done.
fn next_subset(sub: &mut [usize], n: usize) -> bool {
    let k = sub.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if sub[i] < n - (k - i) {
            sub[i] += 1;
            for j in i + 1..k {
                sub[j] = sub[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Brute-force LP oracle: enumerate every candidate basic point (tight
/// row subset + variables fixed at bounds), keep the best feasible one.
/// A boxed LP is never unbounded, so the result is None exactly when the
/// model is infeasible.
fn vertex_enumeration_optimum(model: &MilpModel) -> Option<(f64, Vec<f64>)> {
    let lp = DenseLp::from_model(model);
    let n = lp.lb.len();
    let m = lp.a.len();
    let mut best: Option<(f64, Vec<f64>)> = None;

    for j in 0..=m.min(n) {
        // Tight-row subsets of size j.
        let mut rows: Vec<usize> = (0..j).collect();
        loop {
            // Solved-variable subsets of size j.
            let mut cols: Vec<usize> = (0..j).collect();
            loop {
                let fixed: Vec<usize> = (0..n).filter(|c| !cols.contains(c)).collect();
                for mask in 0u32..(1u32 << fixed.len()) {
                    let mut x = vec![0.0; n];
                    for (bit, &f) in fixed.iter().enumerate() {
                        x[f] = if mask >> bit & 1 == 1 { lp.ub[f] } else { lp.lb[f] };
                    }
                    if j > 0 {
                        let sys: Vec<Vec<f64>> = rows
                            .iter()
                            .map(|&r| cols.iter().map(|&c| lp.a[r][c]).collect())
                            .collect();
                        let sys_rhs: Vec<f64> = rows
                            .iter()
                            .map(|&r| {
                                lp.rhs[r]
                                    - fixed.iter().map(|&f| lp.a[r][f] * x[f]).sum::<f64>()
                            })
                            .collect();
                        let Some(sol) = dense_solve(&sys, &sys_rhs) else {
                            continue;
                        };
                        for (idx, &c) in cols.iter().enumerate() {
                            x[c] = sol[idx];
                        }
                    }
                    if !lp.feasible(&x, 1e-9) {
                        continue;
                    }
                    let v = lp.value(&x);
                    if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                        best = Some((v, x));
                    }
                }
                if !next_subset(&mut cols, n) {
                    break;
                }
            }
            if j == 0 || !next_subset(&mut rows, m) {
                break;
            }
        }
        if j == 0 && m == 0 {
            break;
        }
    }
    best
}

// ---------------------------------------------------------------------
// Deterministic random model generators.
// ---------------------------------------------------------------------

fn rng_for(case: u64) -> PathRng {
    PathRng::for_path(0x4f5a_11ed, StreamClass::Train, Hypothesis::Null, case)
}

fn uniform_in(rng: &mut PathRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.uniform()
}

/// Random dense boxed LP with mixed row senses. `force_infeasible` adds
/// a row no box point can satisfy.
fn random_boxed_lp(case: u64, n: usize, m: usize, force_infeasible: bool) -> MilpModel {
    let mut rng = rng_for(case);
    let mut model = MilpModel::new(format!("lp_case_{case}"));
    let mut lb = Vec::new();
    let mut ub = Vec::new();
    for j in 0..n {
        let l = uniform_in(&mut rng, -2.0, 0.0);
        let u = uniform_in(&mut rng, 0.5, 2.5);
        lb.push(l);
        ub.push(u);
        model.add_continuous(format!("x{j}"), l, u);
    }
    let cost: Vec<(usize, f64)> = (0..n)
        .map(|j| (j, uniform_in(&mut rng, -1.0, 1.0)))
        .collect();
    // An interior anchor keeps equality rows satisfiable.
    let anchor: Vec<f64> = (0..n)
        .map(|j| lb[j] + (ub[j] - lb[j]) * uniform_in(&mut rng, 0.3, 0.7))
        .collect();
    for r in 0..m {
        let coeffs: Vec<(usize, f64)> = (0..n)
            .map(|j| (j, uniform_in(&mut rng, -1.0, 1.0)))
            .collect();
        let at_anchor: f64 = coeffs.iter().map(|&(j, c)| c * anchor[j]).sum();
        let (sense, rhs) = match r % 4 {
            3 if m >= 4 => (Sense::Eq, at_anchor),
            2 => (Sense::Ge, at_anchor - uniform_in(&mut rng, 0.0, 1.0)),
            _ => (Sense::Le, at_anchor + uniform_in(&mut rng, 0.0, 1.0)),
        };
        model.add_constraint(format!("r{r}"), coeffs, sense, rhs);
    }
    if force_infeasible {
        // sum x <= (box minimum of sum x) - 1: impossible inside the box.
        let coeffs: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
        let box_min: f64 = lb.iter().sum();
        model.add_constraint("impossible", coeffs, Sense::Le, box_min - 1.0);
    }
    model.set_objective(cost, uniform_in(&mut rng, -0.5, 0.5));
    model
}

fn dyadic(rng: &mut PathRng, lo_k: i64, hi_k: i64) -> f64 {
    // Uniform integer in [lo_k, hi_k], scaled by 1/64.
    let span = (hi_k - lo_k + 1) as u64;
    let k = lo_k + (rng.next_u64() % span) as i64;
    k as f64 / 64.0
}

/// Random pure-binary model with dyadic data, so objective activities
/// and row activities are exact in f64.
fn random_binary_milp(case: u64, n_bin: usize, rows: usize) -> MilpModel {
    let mut rng = rng_for(1000 + case);
    let mut model = MilpModel::new(format!("bin_case_{case}"));
    let vars: Vec<usize> = (0..n_bin)
        .map(|j| model.add_binary(format!("b{j}")))
        .collect();
    for r in 0..rows {
        let coeffs: Vec<(usize, f64)> = vars
            .iter()
            .map(|&j| (j, dyadic(&mut rng, -96, 96)))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        let pos_sum: f64 = coeffs.iter().map(|&(_, c)| c.max(0.0)).sum();
        let neg_sum: f64 = coeffs.iter().map(|&(_, c)| c.min(0.0)).sum();
        // A right-hand side strictly between the row's reachable extremes,
        // snapped to the dyadic grid.
        let t = uniform_in(&mut rng, 0.25, 0.75);
        let rhs = ((neg_sum + t * (pos_sum - neg_sum)) * 64.0).round() / 64.0;
        let sense = if r % 3 == 2 { Sense::Ge } else { Sense::Le };
        model.add_constraint(format!("r{r}"), coeffs, sense, rhs);
    }
    let objective: Vec<(usize, f64)> = vars
        .iter()
        .map(|&j| (j, dyadic(&mut rng, -128, 128)))
        .filter(|&(_, c)| c != 0.0)
        .collect();
    model.set_objective(objective, dyadic(&mut rng, -32, 32));
    model
}

/// Complete-enumeration oracle for pure-binary models: exact arithmetic
/// on dyadic data, zero feasibility tolerance.
fn binary_enumeration_optimum(model: &MilpModel) -> Option<(f64, Vec<f64>)> {
    let n = model.num_vars();
    assert!(n <= 20, "enumeration guard");
    assert_eq!(model.num_binaries(), n, "oracle expects pure-binary models");
    let lp = DenseLp::from_model(model);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1u32 << n) {
        let x: Vec<f64> = (0..n).map(|j| f64::from(mask >> j & 1)).collect();
        if !lp.feasible(&x, 0.0) {
            continue;
        }
        // Canonical pricing (same term order the solver reports in), so
        // equality below can be exact.
        let v = model.objective_value(&x);
        if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
            best = Some((v, x));
        }
    }
    best
}

// ---------------------------------------------------------------------
// LP engine vs vertex enumeration.
// ---------------------------------------------------------------------

#[test]
fn lp_matches_vertex_enumeration_on_twenty_random_problems() {
    // (vars, rows) shapes chosen to keep subset enumeration cheap while
    // exercising tall, wide, and square systems.
    let shapes: [(usize, usize); 20] = [
        (2, 2),
        (3, 2),
        (2, 3),
        (4, 3),
        (3, 4),
        (5, 2),
        (2, 5),
        (4, 4),
        (5, 3),
        (3, 5),
        (6, 2),
        (2, 6),
        (5, 4),
        (4, 5),
        (6, 3),
        (3, 6),
        (5, 5),
        (7, 2),
        (2, 7),
        (6, 4),
    ];
    let mut optimal_seen = 0;
    let mut infeasible_seen = 0;
    for (case, &(n, m)) in shapes.iter().enumerate() {
        let force_infeasible = case % 7 == 6;
        let model = random_boxed_lp(case as u64, n, m, force_infeasible);
        let oracle = vertex_enumeration_optimum(&model);
        let sol = lp_solve(&model).unwrap();
        match oracle {
            None => {
                assert_eq!(
                    sol.status,
                    LpStatus::Infeasible,
                    "case {case}: oracle found no feasible vertex"
                );
                infeasible_seen += 1;
            }
            Some((want, _)) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                let got = sol.value;
                assert!(
                    (got - want).abs() <= 1e-8 * (1.0 + want.abs()),
                    "case {case}: simplex {got} vs enumeration {want}"
                );
                assert!(
                    model.max_violation(&sol.x) <= 1e-9,
                    "case {case}: residual {}",
                    model.max_violation(&sol.x)
                );
                optimal_seen += 1;
            }
        }
    }
    assert!(optimal_seen >= 15, "most random cases should be feasible");
    assert!(infeasible_seen >= 2, "forced-infeasible cases must appear");
}

#[test]
fn bnb_on_pure_lp_agrees_with_lp_solve() {
    let model = random_boxed_lp(77, 5, 4, false);
    let direct = lp_solve(&model).unwrap();
    let viabnb = solve_bnb(&model, &BnbParams::default()).unwrap();
    assert_eq!(direct.status, LpStatus::Optimal);
    assert_eq!(viabnb.status, MilpStatus::Optimal);
    let a = direct.value;
    let b = viabnb.value.unwrap();
    assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
}

// ---------------------------------------------------------------------
// Branch-and-bound vs complete enumeration.
// ---------------------------------------------------------------------

#[test]
fn knapsack_beats_all_256_subsets() {
    // Item values are distinct powers of two (over 64), so every subset
    // has a distinct total value and the optimum is unique.
    let values = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0].map(|v| v / 64.0);
    let weights = [20.0, 10.0, 28.0, 14.0, 26.0, 38.0, 44.0, 50.0].map(|w| w / 64.0);
    let capacity = 96.0 / 64.0;

    let mut model = MilpModel::new("knapsack8");
    let vars: Vec<usize> = (0..8).map(|i| model.add_binary(format!("item{i}"))).collect();
    model.add_constraint(
        "capacity",
        vars.iter().zip(weights).map(|(&j, w)| (j, w)).collect(),
        Sense::Le,
        capacity,
    );
    // Maximize value == minimize negated value.
    model.set_objective(vars.iter().zip(values).map(|(&j, v)| (j, -v)).collect(), 0.0);

    // Exhaustive oracle with its own arithmetic.
    let mut best_mask = 0u32;
    let mut best_val = f64::INFINITY;
    let mut optima = 0;
    for mask in 0u32..256 {
        let w: f64 = (0..8)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| weights[i])
            .sum();
        if w > capacity {
            continue;
        }
        let v: f64 = (0..8)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| -values[i])
            .sum();
        if v < best_val {
            best_val = v;
            best_mask = mask;
            optima = 1;
        } else if v == best_val {
            optima += 1;
        }
    }
    assert_eq!(optima, 1, "construction guarantees a unique optimum");
    assert_eq!(best_val, -3.0, "items 6 and 7 fit together");
    assert_eq!(best_mask, 0b1100_0000);

    let sol = solve_bnb(&model, &BnbParams::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Optimal);
    assert_eq!(sol.value, Some(-3.0), "dyadic data makes equality exact");
    let x = sol.assignment.unwrap();
    for i in 0..8 {
        assert_eq!(x[i], f64::from(best_mask >> i & 1), "item {i}");
    }
}

#[test]
fn bnb_equals_enumeration_on_random_binary_models() {
    // (binaries, rows) with full 2^n enumeration as the oracle.
    let cases: [(usize, usize); 5] = [(8, 3), (10, 4), (12, 4), (14, 5), (16, 5)];
    let mut solved = 0;
    for (case, &(n, rows)) in cases.iter().enumerate() {
        let model = random_binary_milp(case as u64, n, rows);
        let oracle = binary_enumeration_optimum(&model);
        let sol = solve_bnb(&model, &BnbParams::default()).unwrap();
        match oracle {
            None => assert_eq!(sol.status, MilpStatus::Infeasible, "case {case}"),
            Some((want, _)) => {
                assert_eq!(sol.status, MilpStatus::Optimal, "case {case}");
                assert_eq!(
                    sol.value,
                    Some(want),
                    "case {case}: dyadic values must match exactly"
                );
                let x = sol.assignment.as_ref().unwrap();
                let lp = DenseLp::from_model(&model);
                assert!(lp.feasible(x, 0.0), "case {case}: reported point infeasible");
                assert_eq!(model.objective_value(x), want, "case {case}");
                solved += 1;
            }
        }
    }
    assert!(solved >= 4, "random rows should usually leave room");
}

#[test]
fn forced_infeasible_binary_model_agrees_with_enumeration() {
    let mut model = MilpModel::new("bin_infeasible");
    let a = model.add_binary("a");
    let b = model.add_binary("b");
    model.add_constraint("need_two", vec![(a, 1.0), (b, 1.0)], Sense::Ge, 2.0);
    model.add_constraint("at_most_one", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
    model.set_objective(vec![(a, 1.0)], 0.0);
    assert!(binary_enumeration_optimum(&model).is_none());
    let sol = solve_bnb(&model, &BnbParams::default()).unwrap();
    assert_eq!(sol.status, MilpStatus::Infeasible);
}

// ---------------------------------------------------------------------
// Search invariants: determinism, monotone incumbents, bound sandwich.
// ---------------------------------------------------------------------

#[test]
fn reruns_are_bit_identical() {
    let model = random_binary_milp(4, 16, 5);
    let a = solve_bnb(&model, &BnbParams::default()).unwrap();
    let b = solve_bnb(&model, &BnbParams::default()).unwrap();
    assert_eq!(a.status, b.status);
    assert_eq!(a.value, b.value);
    assert_eq!(a.assignment, b.assignment);
    assert_eq!(a.node_count, b.node_count);
    assert_eq!(a.lp_iterations, b.lp_iterations);
    assert_eq!(a.ticks_used, b.ticks_used);
    assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
}

#[test]
fn row_activation_schedule_does_not_change_the_answer() {
    let model = random_binary_milp(2, 12, 4);
    let default = solve_bnb(&model, &BnbParams::default()).unwrap();
    let trickle = solve_bnb(
        &model,
        &BnbParams {
            rows_per_wave: 1,
            ..BnbParams::default()
        },
    )
    .unwrap();
    assert_eq!(default.status, trickle.status);
    // Same canonical optimum regardless of how rows entered the working set.
    assert_eq!(default.value, trickle.value);
}

#[test]
fn incumbents_improve_and_bounds_sandwich_as_limits_grow() {
    let model = random_binary_milp(3, 14, 5);
    let full = solve_bnb(&model, &BnbParams::default()).unwrap();
    assert_eq!(full.status, MilpStatus::Optimal);
    let vstar = full.value.unwrap();
    assert!(
        full.lower_bound <= vstar + 1e-9,
        "final bound {} must not exceed the optimum {}",
        full.lower_bound,
        vstar
    );
    assert!(full.abs_gap <= 1e-9);
    assert!(full.rel_gap <= 1e-6);

    let mut prev_value = f64::INFINITY;
    let mut prev_bound = f64::NEG_INFINITY;
    for limit in [1u64, 2, 3, 5, 8, 13, 21, 34, 55] {
        let sol = solve_bnb(
            &model,
            &BnbParams {
                node_limit: limit,
                ..BnbParams::default()
            },
        )
        .unwrap();
        if sol.status == MilpStatus::Optimal {
            assert_eq!(sol.value, Some(vstar));
            break;
        }
        assert_eq!(sol.status, MilpStatus::TimeLimitIncumbent);
        // Lower bounds never regress as the prefix of the search grows.
        assert!(
            sol.lower_bound >= prev_bound - 1e-12,
            "bound regressed: {} after {}",
            sol.lower_bound,
            prev_bound
        );
        assert!(sol.lower_bound <= vstar + 1e-9);
        prev_bound = sol.lower_bound;
        if let Some(v) = sol.value {
            // Incumbents only ever improve, and never beat the optimum.
            assert!(v <= prev_value + 1e-12);
            assert!(v >= vstar - 1e-12);
            prev_value = v;
        }
    }
}
