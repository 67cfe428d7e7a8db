//! Sample-average design problems and their canonical empirical scoring.
//!
//! A design problem carries simulated statistic paths under the null and
//! the alternative (plus a third, drift-scaled set when a two-boundary
//! design is wanted), an empirical type-1 budget, and a type-2 bound.
//! The evaluators in this file are the ground truth for everything else:
//! the integer-program compilation, the enumeration oracle, and the
//! solver pipeline's post-solve audit are all checked against these
//! indicator sums.
//!
//! Tie conventions match the big-M semantics of the compiled program
//! exactly. On null paths the accept events use weak inequalities and
//! closed continuation bands; on alternative and drift-scaled paths the
//! accept/continue events are strict with open bands. The objective
//! accumulates path-major and stage-ascending starting from the committed
//! first-stage cost, which is the same order the integer-program
//! objective evaluator uses, so optimal values compare bit for bit.

use crate::error::Error;
use crate::sampling::{DesignSpec, Hypothesis, PathMatrix};
use crate::Result;
use serde::{Deserialize, Serialize};

/// Stage cutoffs produced by a design run.
///
/// `Standard` keeps one rejection threshold per stage: the trial stops
/// for efficacy at the first stage whose statistic exceeds its
/// threshold. `Symmetric` keeps an accept boundary (`lower`) and a
/// reject boundary (`upper`) per stage; the two must close at the final
/// stage so every path reaches a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CutoffVector {
    Standard { thresholds: Vec<f64> },
    Symmetric { lower: Vec<f64>, upper: Vec<f64> },
}

impl CutoffVector {
    /// Single-boundary cutoffs, validated for shape.
    pub fn standard(thresholds: Vec<f64>) -> Result<Self> {
        let c = CutoffVector::Standard { thresholds };
        c.validate()?;
        Ok(c)
    }

    /// Two-boundary cutoffs, validated for shape and boundary order.
    pub fn symmetric(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let c = CutoffVector::Symmetric { lower, upper };
        c.validate()?;
        Ok(c)
    }

    /// Number of stages the cutoffs cover.
    pub fn k_stages(&self) -> usize {
        match self {
            CutoffVector::Standard { thresholds } => thresholds.len(),
            CutoffVector::Symmetric { lower, .. } => lower.len(),
        }
    }

    /// Whether this is a two-boundary (accept + reject) design.
    pub fn is_symmetric(&self) -> bool {
        matches!(self, CutoffVector::Symmetric { .. })
    }

    /// Shape and ordering invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            CutoffVector::Standard { thresholds } => {
                if thresholds.is_empty() {
                    return Err(Error::validation("cutoffs must cover at least one stage"));
                }
                if thresholds.iter().any(|t| !t.is_finite()) {
                    return Err(Error::validation("cutoffs must be finite"));
                }
            }
            CutoffVector::Symmetric { lower, upper } => {
                if lower.is_empty() {
                    return Err(Error::validation("cutoffs must cover at least one stage"));
                }
                if lower.len() != upper.len() {
                    return Err(Error::validation(format!(
                        "boundary lengths differ: {} lower vs {} upper",
                        lower.len(),
                        upper.len()
                    )));
                }
                if lower.iter().chain(upper.iter()).any(|t| !t.is_finite()) {
                    return Err(Error::validation("cutoffs must be finite"));
                }
                let k = lower.len();
                for i in 0..k {
                    if lower[i] > upper[i] {
                        return Err(Error::validation(format!(
                            "accept boundary exceeds reject boundary at stage {}: {} > {}",
                            i + 1,
                            lower[i],
                            upper[i]
                        )));
                    }
                }
                if lower[k - 1] != upper[k - 1] {
                    return Err(Error::validation(format!(
                        "boundaries must meet at the final stage, got {} and {}",
                        lower[k - 1],
                        upper[k - 1]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Check every cutoff lies inside `[lo, hi]`.
    pub fn check_box(&self, lo: f64, hi: f64) -> Result<()> {
        let all = |v: &[f64]| v.iter().all(|&t| t >= lo && t <= hi);
        let ok = match self {
            CutoffVector::Standard { thresholds } => all(thresholds),
            CutoffVector::Symmetric { lower, upper } => all(lower) && all(upper),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "cutoffs outside the threshold box [{lo}, {hi}]"
            )))
        }
    }
}

/// A sample-average design problem over simulated statistic paths.
///
/// Fields are public so experiments can override the budgets taken from
/// the spec; [`SaaProblem::validate`] keeps the pieces consistent.
#[derive(Debug, Clone)]
pub struct SaaProblem {
    /// Trial design the paths were simulated from.
    pub spec: DesignSpec,
    /// Paths simulated under the null hypothesis.
    pub null_paths: PathMatrix,
    /// Paths simulated under the design alternative.
    pub alt_paths: PathMatrix,
    /// Paths under the drift-scaled hypothesis; present exactly when a
    /// two-boundary design is requested.
    pub tilde_paths: Option<PathMatrix>,
    /// Empirical type-1 budget: the fraction of null paths that accept
    /// must be at least `1 - alpha_tilde`.
    pub alpha_tilde: f64,
    /// Type-2 bound: the fraction of alternative paths that accept must
    /// be at most `beta`. `1.0` disables the constraint.
    pub beta: f64,
}

impl SaaProblem {
    /// Assemble a problem, taking the budgets from the spec.
    pub fn new(
        spec: DesignSpec,
        null_paths: PathMatrix,
        alt_paths: PathMatrix,
        tilde_paths: Option<PathMatrix>,
    ) -> Result<Self> {
        let problem = SaaProblem {
            alpha_tilde: spec.alpha_tilde(),
            beta: spec.beta,
            spec,
            null_paths,
            alt_paths,
            tilde_paths,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Number of simulated paths per hypothesis.
    pub fn m_paths(&self) -> usize {
        self.null_paths.m_paths
    }

    /// Number of interim analyses.
    pub fn k_stages(&self) -> usize {
        self.spec.k_stages()
    }

    /// Whether this problem asks for a two-boundary design.
    pub fn is_symmetric(&self) -> bool {
        self.tilde_paths.is_some()
    }

    /// Consistency of spec, path sets, and budgets.
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let k = self.spec.k_stages();
        let cums = self.spec.stages_cum();
        let check = |paths: &PathMatrix, want: Hypothesis, label: &str| -> Result<()> {
            if paths.hypothesis != want {
                return Err(Error::validation(format!(
                    "{label} paths are tagged {:?}, expected {want:?}",
                    paths.hypothesis
                )));
            }
            if paths.k_stages() != k {
                return Err(Error::validation(format!(
                    "{label} paths have {} stages, spec has {k}",
                    paths.k_stages()
                )));
            }
            if paths.stages_cum != cums {
                return Err(Error::validation(format!(
                    "{label} paths were simulated on a different schedule"
                )));
            }
            if paths.m_paths != self.null_paths.m_paths {
                return Err(Error::validation(format!(
                    "{label} paths have {} rows, null paths have {}",
                    paths.m_paths, self.null_paths.m_paths
                )));
            }
            Ok(())
        };
        check(&self.null_paths, Hypothesis::Null, "null")?;
        check(&self.alt_paths, Hypothesis::Alt, "alternative")?;
        if let Some(t) = &self.tilde_paths {
            check(t, Hypothesis::Tilde, "drift-scaled")?;
        }
        if self.null_paths.m_paths == 0 {
            return Err(Error::validation("need at least one simulated path"));
        }
        if !(self.alpha_tilde >= 0.0 && self.alpha_tilde <= 1.0) {
            return Err(Error::validation(format!(
                "empirical type-1 budget must be in [0,1], got {}",
                self.alpha_tilde
            )));
        }
        if !(self.beta >= 0.0 && self.beta <= 1.0) {
            return Err(Error::validation(format!(
                "type-2 bound must be in [0,1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Committed first-stage cost and the per-stage objective coefficients
/// shared verbatim by the empirical evaluator and the integer-program
/// builder, so both sides accumulate bit-identical values.
pub(crate) fn objective_terms(spec: &DesignSpec, m_paths: usize) -> (f64, Vec<f64>) {
    let offset = spec.stage_sizes[0] as f64;
    let coeffs = (1..spec.k_stages())
        .map(|j| spec.stage_sizes[j] as f64 / m_paths as f64)
        .collect();
    (offset, coeffs)
}

fn check_dims(problem: &SaaProblem, cutoffs: &CutoffVector) -> Result<()> {
    cutoffs.validate()?;
    if cutoffs.k_stages() != problem.k_stages() {
        return Err(Error::validation(format!(
            "cutoffs cover {} stages, problem has {}",
            cutoffs.k_stages(),
            problem.k_stages()
        )));
    }
    Ok(())
}

/// Fraction of null-hypothesis paths that end in acceptance.
///
/// Standard cutoffs accept when every stage statistic stays weakly below
/// its threshold. Symmetric cutoffs count, for each path, the stages
/// where the statistic is weakly below the accept boundary while all
/// earlier stages stayed inside the closed continuation band; a path
/// sitting exactly on a boundary can be counted at more than one stage,
/// so the returned mass may exceed one. That over-count matches the
/// compiled integer program and errs on the conservative side of the
/// type-1 budget.
pub fn empirical_accept_null(problem: &SaaProblem, cutoffs: &CutoffVector) -> Result<f64> {
    check_dims(problem, cutoffs)?;
    let paths = &problem.null_paths;
    let m_paths = paths.m_paths;
    let count: usize = match cutoffs {
        CutoffVector::Standard { thresholds } => (0..m_paths)
            .filter(|&m| {
                paths
                    .row(m)
                    .iter()
                    .zip(thresholds)
                    .all(|(&s, &t)| s <= t)
            })
            .count(),
        CutoffVector::Symmetric { lower, upper } => {
            let mut acc = 0usize;
            for m in 0..m_paths {
                let row = paths.row(m);
                let mut inside = true;
                for k in 0..row.len() {
                    if inside && row[k] <= lower[k] {
                        acc += 1;
                    }
                    inside = inside && lower[k] <= row[k] && row[k] <= upper[k];
                }
            }
            acc
        }
    };
    Ok(count as f64 / m_paths as f64)
}

/// Fraction of alternative-hypothesis paths that end in acceptance (the
/// empirical type-2 proxy). Same event shapes as
/// [`empirical_accept_null`], but with strict accept events and open
/// continuation bands.
pub fn empirical_accept_alt(problem: &SaaProblem, cutoffs: &CutoffVector) -> Result<f64> {
    check_dims(problem, cutoffs)?;
    let paths = &problem.alt_paths;
    let m_paths = paths.m_paths;
    let count: usize = match cutoffs {
        CutoffVector::Standard { thresholds } => (0..m_paths)
            .filter(|&m| {
                paths
                    .row(m)
                    .iter()
                    .zip(thresholds)
                    .all(|(&s, &t)| s < t)
            })
            .count(),
        CutoffVector::Symmetric { lower, upper } => {
            let mut acc = 0usize;
            for m in 0..m_paths {
                let row = paths.row(m);
                let mut inside = true;
                for k in 0..row.len() {
                    if inside && row[k] < lower[k] {
                        acc += 1;
                    }
                    inside = inside && lower[k] < row[k] && row[k] < upper[k];
                }
            }
            acc
        }
    };
    Ok(count as f64 / m_paths as f64)
}

/// Empirical expected sample size of the design given by `cutoffs`.
///
/// Starts from the committed first-stage cost and, path by path and
/// stage by stage, adds each later stage's cost whenever the path is
/// still running when that stage begins. Standard designs keep running
/// while the statistic stays strictly below the threshold, scored on
/// alternative paths; symmetric designs keep running inside the open
/// band, scored on the drift-scaled paths.
pub fn empirical_objective(problem: &SaaProblem, cutoffs: &CutoffVector) -> Result<f64> {
    check_dims(problem, cutoffs)?;
    let k_stages = problem.k_stages();
    let m_paths = problem.m_paths();
    let (offset, coeffs) = objective_terms(&problem.spec, m_paths);
    let mut value = offset;
    match cutoffs {
        CutoffVector::Standard { thresholds } => {
            let paths = &problem.alt_paths;
            for m in 0..m_paths {
                let row = paths.row(m);
                let mut running = true;
                for j in 1..k_stages {
                    running = running && row[j - 1] < thresholds[j - 1];
                    if running {
                        value += coeffs[j - 1];
                    }
                }
            }
        }
        CutoffVector::Symmetric { lower, upper } => {
            let paths = problem.tilde_paths.as_ref().ok_or_else(|| {
                Error::validation(
                    "two-boundary cutoffs need drift-scaled paths to score the objective",
                )
            })?;
            for m in 0..m_paths {
                let row = paths.row(m);
                let mut running = true;
                for j in 1..k_stages {
                    let s = row[j - 1];
                    running = running && lower[j - 1] < s && s < upper[j - 1];
                    if running {
                        value += coeffs[j - 1];
                    }
                }
            }
        }
    }
    Ok(value)
}

/// Whether the design meets both empirical budgets, with `slack` of
/// tolerance on each side.
pub fn meets_budgets(problem: &SaaProblem, cutoffs: &CutoffVector, slack: f64) -> Result<bool> {
    let accept_null = empirical_accept_null(problem, cutoffs)?;
    let accept_alt = empirical_accept_alt(problem, cutoffs)?;
    Ok(accept_null >= 1.0 - problem.alpha_tilde - slack && accept_alt <= problem.beta + slack)
}

/// First-exit decomposition of one path set under a design: per-stage
/// accept and reject fractions plus the fraction that runs through the
/// final stage without a verdict. Each path is classified exactly once,
/// so the three pieces always sum to one. Exits are strict crossings;
/// a path sitting exactly on a boundary keeps running, which for a
/// two-boundary design can leave run-through mass at the final stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitMasses {
    /// Fraction accepting at each stage (always zero for standard
    /// designs, which accept only by running out the trial).
    pub accept: Vec<f64>,
    /// Fraction rejecting at each stage.
    pub reject: Vec<f64>,
    /// Fraction never leaving the continuation region.
    pub run_through: f64,
}

/// Classify every path in `paths` by its first boundary exit.
pub fn first_exit_masses(paths: &PathMatrix, cutoffs: &CutoffVector) -> Result<ExitMasses> {
    cutoffs.validate()?;
    let k_stages = paths.k_stages();
    if cutoffs.k_stages() != k_stages {
        return Err(Error::validation(format!(
            "cutoffs cover {} stages, paths have {k_stages}",
            cutoffs.k_stages()
        )));
    }
    let m_paths = paths.m_paths;
    let mut accept = vec![0usize; k_stages];
    let mut reject = vec![0usize; k_stages];
    let mut run_through = 0usize;
    for m in 0..m_paths {
        let row = paths.row(m);
        let mut exited = false;
        for k in 0..k_stages {
            let s = row[k];
            match cutoffs {
                CutoffVector::Standard { thresholds } => {
                    if s > thresholds[k] {
                        reject[k] += 1;
                        exited = true;
                    }
                }
                CutoffVector::Symmetric { lower, upper } => {
                    if s < lower[k] {
                        accept[k] += 1;
                        exited = true;
                    } else if s > upper[k] {
                        reject[k] += 1;
                        exited = true;
                    }
                }
            }
            if exited {
                break;
            }
        }
        if !exited {
            run_through += 1;
        }
    }
    let frac = |v: Vec<usize>| v.into_iter().map(|c| c as f64 / m_paths as f64).collect();
    Ok(ExitMasses {
        accept: frac(accept),
        reject: frac(reject),
        run_through: run_through as f64 / m_paths as f64,
    })
}
