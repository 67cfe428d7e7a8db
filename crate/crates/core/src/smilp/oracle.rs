//! Exhaustive-search reference for tiny design problems.
//!
//! The empirical masses only change when a cutoff moves across a sampled
//! statistic, so per stage it suffices to try every sampled value — with
//! a hair of jitter on both sides to capture the weak/strict distinction
//! — plus the two box ends. On instances small enough to enumerate, the
//! best feasible combination is the exact optimum of the sample-average
//! problem, found by direct evaluation of the canonical scoring
//! functions: no linear programming, no branching, no big-M rows. That
//! independence is what makes this a trustworthy check on the compiled
//! program and its solver.

use crate::error::Error;
use crate::smilp::build::{effective_box, BuildOptions};
use crate::smilp::problem::{
    empirical_objective, meets_budgets, CutoffVector, SaaProblem,
};
use crate::Result;

/// Result of the exhaustive search.
#[derive(Debug, Clone)]
pub enum OracleOutcome {
    /// Best feasible design and its empirical objective value.
    Optimal { value: f64, cutoffs: CutoffVector },
    /// No candidate met both budgets.
    Infeasible,
}

const MAX_STANDARD_PATHS: usize = 40;
const MAX_SYMMETRIC_PATHS: usize = 12;
const MAX_STAGES: usize = 2;

/// Exhaustively solve a tiny design problem. Refuses instances large
/// enough that enumeration would be slow; this is a reference, not a
/// solver.
pub fn enumerate_oracle(problem: &SaaProblem, opts: &BuildOptions) -> Result<OracleOutcome> {
    problem.validate()?;
    let k_stages = problem.k_stages();
    let m_paths = problem.m_paths();
    let max_paths = if problem.is_symmetric() {
        MAX_SYMMETRIC_PATHS
    } else {
        MAX_STANDARD_PATHS
    };
    if k_stages > MAX_STAGES || m_paths > max_paths {
        return Err(Error::validation(format!(
            "enumeration covers at most {max_paths} paths over {MAX_STAGES} stages, \
             got {m_paths} paths over {k_stages} stages"
        )));
    }
    let (lo, hi, _widened) = effective_box(problem, opts.theta_box)?;
    let cands = stage_candidates(problem, lo, hi);
    if problem.is_symmetric() {
        search_symmetric(problem, &cands)
    } else {
        search_standard(problem, &cands)
    }
}

/// Semantically distinct cutoff values per stage: each sampled value
/// with a +-1e-9 jitter, clipped to the box, plus the box ends.
fn stage_candidates(problem: &SaaProblem, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    let k_stages = problem.k_stages();
    let mut out = Vec::with_capacity(k_stages);
    for k in 0..k_stages {
        let mut vals = vec![lo, hi];
        let mut push_all = |col: Vec<f64>| {
            for v in col {
                for cand in [v - 1e-9, v, v + 1e-9] {
                    if cand >= lo && cand <= hi {
                        vals.push(cand);
                    }
                }
            }
        };
        push_all(problem.null_paths.stage_column(k));
        push_all(problem.alt_paths.stage_column(k));
        if let Some(tilde) = &problem.tilde_paths {
            push_all(tilde.stage_column(k));
        }
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        out.push(vals);
    }
    out
}

fn consider(
    problem: &SaaProblem,
    cutoffs: CutoffVector,
    best: &mut Option<(f64, CutoffVector)>,
) -> Result<()> {
    if meets_budgets(problem, &cutoffs, 0.0)? {
        let value = empirical_objective(problem, &cutoffs)?;
        if best.as_ref().map_or(true, |(bv, _)| value < *bv) {
            *best = Some((value, cutoffs));
        }
    }
    Ok(())
}

fn search_standard(problem: &SaaProblem, cands: &[Vec<f64>]) -> Result<OracleOutcome> {
    let mut best: Option<(f64, CutoffVector)> = None;
    match cands.len() {
        1 => {
            for &t0 in &cands[0] {
                consider(
                    problem,
                    CutoffVector::Standard {
                        thresholds: vec![t0],
                    },
                    &mut best,
                )?;
            }
        }
        2 => {
            for &t0 in &cands[0] {
                for &t1 in &cands[1] {
                    consider(
                        problem,
                        CutoffVector::Standard {
                            thresholds: vec![t0, t1],
                        },
                        &mut best,
                    )?;
                }
            }
        }
        _ => unreachable!("stage guard admits at most two stages"),
    }
    Ok(match best {
        Some((value, cutoffs)) => OracleOutcome::Optimal { value, cutoffs },
        None => OracleOutcome::Infeasible,
    })
}

fn search_symmetric(problem: &SaaProblem, cands: &[Vec<f64>]) -> Result<OracleOutcome> {
    let mut best: Option<(f64, CutoffVector)> = None;
    match cands.len() {
        1 => {
            // Single stage: the boundaries are tied into one cutoff.
            for &c0 in &cands[0] {
                consider(
                    problem,
                    CutoffVector::Symmetric {
                        lower: vec![c0],
                        upper: vec![c0],
                    },
                    &mut best,
                )?;
            }
        }
        2 => {
            // Stage 1 takes an ordered pair (candidates are sorted, so
            // index order gives the boundary order); stage 2 is tied.
            for i in 0..cands[0].len() {
                for j in i..cands[0].len() {
                    for &c1 in &cands[1] {
                        consider(
                            problem,
                            CutoffVector::Symmetric {
                                lower: vec![cands[0][i], c1],
                                upper: vec![cands[0][j], c1],
                            },
                            &mut best,
                        )?;
                    }
                }
            }
        }
        _ => unreachable!("stage guard admits at most two stages"),
    }
    Ok(match best {
        Some((value, cutoffs)) => OracleOutcome::Optimal { value, cutoffs },
        None => OracleOutcome::Infeasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{
        DesignSpec, Hypothesis, PathMatrix, Sidedness, StreamClass, TestFamily,
    };

    fn z_spec(stage_sizes: Vec<u32>) -> DesignSpec {
        DesignSpec {
            family: TestFamily::Z {
                mu_alt: 0.5,
                sigma: 1.0,
            },
            sidedness: Sidedness::One,
            stage_sizes,
            alpha: 0.05,
            alpha_buffer: None,
            beta: 0.95,
            lambda: 1.0,
        }
    }

    fn matrix(hyp: Hypothesis, cums: Vec<f64>, values: Vec<f64>) -> PathMatrix {
        PathMatrix::from_values(hyp, StreamClass::Train, 0, cums, values).unwrap()
    }

    fn standard_problem(
        null: Vec<f64>,
        alt: Vec<f64>,
        k: usize,
        alpha_tilde: f64,
        beta: f64,
    ) -> SaaProblem {
        let spec = z_spec(vec![10u32; k]);
        let cums = spec.stages_cum();
        let mut p = SaaProblem::new(
            spec,
            matrix(Hypothesis::Null, cums.clone(), null),
            matrix(Hypothesis::Alt, cums, alt),
            None,
        )
        .unwrap();
        p.alpha_tilde = alpha_tilde;
        p.beta = beta;
        p
    }

    #[test]
    fn single_stage_budget_only_problem_costs_the_first_stage() {
        // Keep three of four null paths: any cutoff at or above 1 works,
        // and with one stage the objective is the committed first stage.
        let p = standard_problem(
            vec![-1.0, 0.0, 1.0, 2.0],
            vec![0.0, 0.0, 0.0, 0.0],
            1,
            0.25,
            1.0,
        );
        match enumerate_oracle(&p, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, cutoffs } => {
                assert_eq!(value, 10.0);
                assert!(meets_budgets(&p, &cutoffs, 0.0).unwrap());
            }
            _ => panic!("expected a feasible design"),
        }
    }

    #[test]
    fn two_stage_hand_instance_hits_known_optimum() {
        // Null diagonal paths at 0,1,2,3; alternative first stages at
        // 0.5,1.5,2.5,3.5. With two crossings allowed the first-stage
        // cutoff cannot drop below 1, so exactly one alternative path
        // keeps running and the optimum is 10 + 10/4.
        let p = standard_problem(
            vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0],
            vec![0.5, 0.0, 1.5, 0.0, 2.5, 0.0, 3.5, 0.0],
            2,
            0.5,
            1.0,
        );
        match enumerate_oracle(&p, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, .. } => assert_eq!(value, 12.5),
            _ => panic!("expected a feasible design"),
        }
    }

    #[test]
    fn binding_type2_budget_forces_low_cutoffs_or_infeasibility() {
        // beta = 0 forbids any accepted alternative path: the cutoff
        // must sit weakly below every alternative statistic.
        let p = standard_problem(vec![0.7, 0.8], vec![0.5, 1.0], 1, 1.0, 0.0);
        match enumerate_oracle(&p, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, cutoffs } => {
                assert_eq!(value, 10.0);
                match cutoffs {
                    CutoffVector::Standard { thresholds } => assert!(thresholds[0] <= 0.5),
                    _ => unreachable!(),
                }
            }
            _ => panic!("expected a feasible design"),
        }
        // A box floor above the smallest alternative statistic makes
        // that impossible (null samples do not widen the floor upward).
        let p2 = standard_problem(vec![0.7, 0.8], vec![0.5, 1.0], 1, 1.0, 0.0);
        let opts = BuildOptions {
            theta_box: Some((0.6, 10.0)),
            presolve: false,
        };
        assert!(matches!(
            enumerate_oracle(&p2, &opts).unwrap(),
            OracleOutcome::Infeasible
        ));
    }

    #[test]
    fn single_path_problem_is_feasible_with_half_budget() {
        let p = standard_problem(vec![0.0], vec![0.0], 1, 0.5, 1.0);
        match enumerate_oracle(&p, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, .. } => assert_eq!(value, 10.0),
            _ => panic!("expected feasible"),
        }
    }

    #[test]
    fn widening_brings_low_null_samples_into_reach() {
        // A null statistic below the default box floor must still be
        // retainable when the budget forbids crossings.
        let p = standard_problem(vec![-12.0], vec![0.0], 1, 0.0, 1.0);
        match enumerate_oracle(&p, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, .. } => assert_eq!(value, 10.0),
            _ => panic!("expected feasible"),
        }
    }

    fn symmetric_problem(
        null: Vec<f64>,
        alt: Vec<f64>,
        tilde: Vec<f64>,
        k: usize,
        alpha_tilde: f64,
        beta: f64,
    ) -> SaaProblem {
        let spec = z_spec(vec![10u32; k]);
        let cums = spec.stages_cum();
        let mut p = SaaProblem::new(
            spec,
            matrix(Hypothesis::Null, cums.clone(), null),
            matrix(Hypothesis::Alt, cums.clone(), alt),
            Some(matrix(Hypothesis::Tilde, cums, tilde)),
        )
        .unwrap();
        p.alpha_tilde = alpha_tilde;
        p.beta = beta;
        p
    }

    #[test]
    fn symmetric_single_stage_feasibility_depends_on_type2_bound() {
        // Any cutoff keeping the null path at 0 must sit at or above 0,
        // but then both alternative paths accept: infeasible at
        // beta = 0.5, feasible once the type-2 bound is lifted.
        let tight = symmetric_problem(
            vec![0.0, 5.0],
            vec![-3.0, -4.0],
            vec![1.0, 1.0],
            1,
            0.5,
            0.5,
        );
        assert!(matches!(
            enumerate_oracle(&tight, &BuildOptions::default()).unwrap(),
            OracleOutcome::Infeasible
        ));
        let loose = symmetric_problem(
            vec![0.0, 5.0],
            vec![-3.0, -4.0],
            vec![1.0, 1.0],
            1,
            0.5,
            1.0,
        );
        match enumerate_oracle(&loose, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, cutoffs } => {
                assert_eq!(value, 10.0);
                match cutoffs {
                    CutoffVector::Symmetric { lower, upper } => {
                        assert_eq!(lower, upper);
                        assert!(lower[0] >= 0.0);
                    }
                    _ => unreachable!(),
                }
            }
            _ => panic!("expected feasible"),
        }
    }

    #[test]
    fn symmetric_two_stage_prefers_early_stopping() {
        // Drift-scaled paths at (0.5, *) can be stopped at stage 1 by an
        // accept boundary at 0.5 (weak on null, so the null path at 0.5
        // also accepts, paying the type-1 budget back).
        let p = symmetric_problem(
            vec![0.5, 0.0, 3.0, 3.0],
            vec![4.0, 4.0, 5.0, 5.0],
            vec![0.5, 0.0, 0.4, 0.0],
            2,
            0.5,
            1.0,
        );
        match enumerate_oracle(&p, &BuildOptions::default()).unwrap() {
            OracleOutcome::Optimal { value, .. } => {
                // Both drift-scaled paths can be excluded from stage 2:
                // lower boundary 0.5 stops them (0.5 not strictly above,
                // 0.4 strictly below), so only the committed stage pays.
                assert_eq!(value, 10.0);
            }
            _ => panic!("expected feasible"),
        }
    }

    #[test]
    fn oracle_refuses_instances_beyond_its_guards() {
        let p = standard_problem(vec![0.0; 41], vec![0.0; 41], 1, 0.5, 1.0);
        assert!(enumerate_oracle(&p, &BuildOptions::default()).is_err());
        let p3 = standard_problem(vec![0.0; 3], vec![0.0; 3], 3, 0.5, 1.0);
        assert!(enumerate_oracle(&p3, &BuildOptions::default()).is_err());
        let sym = symmetric_problem(
            vec![0.0; 13],
            vec![0.0; 13],
            vec![0.0; 13],
            1,
            0.5,
            1.0,
        );
        assert!(enumerate_oracle(&sym, &BuildOptions::default()).is_err());
    }
}
