//! Finite-sample accuracy guarantees for sample-average designs.
//!
//! The empirical stopping probabilities that the design program
//! constrains are Monte Carlo estimates. Uniformly over all cutoff
//! vectors in the box, they deviate from their exact counterparts by at
//! most `eps` with probability `1 - eta`: a union bound over a
//! `1/sqrt(M)`-spaced cutoff grid supplies the concentration part
//! ([`saa_epsilon1`]), and density envelopes for the statistic convert
//! grid snapping into a deterministic remainder. The same machinery
//! bounds the deviation of the expected-sample-size objective
//! ([`saa_epsilon_f`]).
//!
//! Those bounds turn two shifted design solves into a confidence
//! interval for the exact optimum ([`saa_value_interval`]): relaxing
//! both budgets by `eps` yields a problem whose optimal value sits
//! below every exactly-feasible design's cost (up to `eps_f`), while
//! tightening them by `eps` yields designs that are exactly feasible
//! with high probability, so their true cost sits above the optimum.

use crate::error::Error;
use crate::gaussnum::{sequential_probs, RecursionGrid, StageRegions};
use crate::sampling::{generate_paths, DesignSpec, Hypothesis, Sidedness, StreamClass, TestFamily};
use crate::smilp::build::effective_box;
use crate::smilp::pipeline::{solve_problem, SolverParams};
use crate::smilp::problem::{CutoffVector, SaaProblem};
use crate::Result;

/// Envelope constants for the statistic's stagewise densities and for
/// the objective integrand, on the cutoff scale.
///
/// `*_sup` bounds the density itself, `*_lip` bounds its variation per
/// unit of cutoff movement. The objective pair plays the same role for
/// the expected-sample-size integrand, so it scales with the sample
/// budget committed after stage one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityBounds {
    /// Sup of the stage-statistic density under the retained law.
    pub null_density_sup: f64,
    /// Variation bound of that density per unit cutoff shift.
    pub null_density_lip: f64,
    /// Sup of the stage-statistic density under the rejected law.
    pub alt_density_sup: f64,
    /// Variation bound of that density per unit cutoff shift.
    pub alt_density_lip: f64,
    /// Sup envelope of the expected-sample-size integrand.
    pub objective_sup: f64,
    /// Variation bound of that integrand per unit cutoff shift.
    pub objective_lip: f64,
}

/// Conservative envelopes for Gaussian-statistic families.
///
/// Every stage statistic is standard normal after centering, so its
/// density never exceeds `1/sqrt(2*pi)` and moves by less than twice
/// that per unit shift. The objective integrand aggregates the sample
/// sizes committed after stage one against those same densities.
/// Custom samplers carry no density information, so they must supply
/// their own envelopes.
pub fn gaussian_defaults(spec: &DesignSpec) -> Result<DensityBounds> {
    spec.validate()?;
    if matches!(spec.family, TestFamily::Custom { .. }) {
        return Err(Error::validation(
            "density envelopes for custom samplers must be supplied explicitly",
        ));
    }
    let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let n_rest: f64 = spec.stage_sizes[1..].iter().map(|&n| f64::from(n)).sum();
    Ok(DensityBounds {
        null_density_sup: inv,
        null_density_lip: 2.0 * inv,
        alt_density_sup: inv,
        alt_density_lip: 2.0 * inv,
        objective_sup: n_rest * inv,
        objective_lip: 2.0 * n_rest * inv,
    })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::validation(format!(
            "failure probability eta must lie in (0, 1], got {eta}"
        )));
    }
    Ok(())
}

fn check_box(theta_box: (f64, f64)) -> Result<()> {
    let (lo, hi) = theta_box;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::validation(format!(
            "cutoff box ({lo}, {hi}) must be a finite nonempty interval"
        )));
    }
    Ok(())
}

/// Uniform concentration radius for empirical stopping probabilities
/// over a `1/sqrt(M)`-spaced cutoff grid.
///
/// With `M` paths and `K` stages the grid has `ceil(sqrt(M))^K` cells;
/// a union of Hoeffding bounds over four empirical quantities per cell
/// gives radius `sqrt(log(4 * cells / eta) / (2M))`, holding with
/// probability `1 - eta`.
pub fn saa_epsilon1(eta: f64, m_paths: usize, k_stages: usize) -> Result<f64> {
    check_eta(eta)?;
    if m_paths == 0 {
        return Err(Error::validation("need at least one path"));
    }
    if k_stages == 0 {
        return Err(Error::validation("need at least one stage"));
    }
    let m = m_paths as f64;
    let cells = m.sqrt().ceil().powi(i32::try_from(k_stages).unwrap_or(i32::MAX));
    Ok(((4.0 * cells / eta).ln() / (2.0 * m)).sqrt())
}

/// Accuracy radii produced by [`saa_epsilon`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaaEpsilons {
    /// Uniform deviation bound for the empirical budget constraints.
    pub eps: f64,
    /// Grid concentration radius at the requested `eta`.
    pub eps1: f64,
    /// Cutoff grid spacing `(hi - lo) / sqrt(M)`.
    pub delta: f64,
}

/// Uniform deviation bound between empirical and exact budget
/// constraints, over every cutoff vector in the box.
///
/// Combines the grid concentration radius (at `eta / 4`, doubled for
/// the two-sided comparison) with a deterministic snapping remainder:
/// moving each of the `K` cutoffs to its nearest grid point changes the
/// exact stopping probabilities by at most the worst density envelope
/// times the total movement `K * (hi - lo) / sqrt(M)`.
pub fn saa_epsilon(
    eta: f64,
    m_paths: usize,
    k_stages: usize,
    theta_box: (f64, f64),
    bounds: &DensityBounds,
) -> Result<SaaEpsilons> {
    check_eta(eta)?;
    check_box(theta_box)?;
    let (lo, hi) = theta_box;
    let eps1_quarter = saa_epsilon1(eta / 4.0, m_paths, k_stages)?;
    let eps1 = saa_epsilon1(eta, m_paths, k_stages)?;
    let m = m_paths as f64;
    let delta = (hi - lo) / m.sqrt();
    let law_envelope = (bounds.null_density_sup + bounds.null_density_lip)
        .max(bounds.alt_density_sup + bounds.alt_density_lip);
    let eps = 2.0 * eps1_quarter + law_envelope * (k_stages as f64) * (hi - lo) / m.sqrt();
    Ok(SaaEpsilons { eps, eps1, delta })
}

/// Uniform deviation bound between the empirical and exact
/// expected-sample-size objectives, over every cutoff vector in the
/// box.
///
/// Grid snapping contributes the `objective_sup` and `objective_lip`
/// terms; concentration of the per-stage continuation frequencies
/// contributes one radius at `eta`, one at `eta / (K - 1)` (union over
/// the `K - 1` stages that charge samples), and one plain Hoeffding
/// tail for the grid-free comparison. Single-stage designs have a
/// constant objective, so every term vanishes with the post-stage-one
/// budget.
pub fn saa_epsilon_f(
    eta: f64,
    m_paths: usize,
    spec: &DesignSpec,
    theta_box: (f64, f64),
    bounds: &DensityBounds,
) -> Result<f64> {
    check_eta(eta)?;
    check_box(theta_box)?;
    spec.validate()?;
    let k_stages = spec.stage_sizes.len();
    let n_rest: f64 = spec.stage_sizes[1..].iter().map(|&n| f64::from(n)).sum();
    let m = m_paths as f64;
    let kf = k_stages as f64;
    let delta = (theta_box.1 - theta_box.0) / m.sqrt();
    let mut total = bounds.objective_sup * kf * delta / 2.0;
    total += n_rest * saa_epsilon1(eta, m_paths, k_stages)?;
    total += bounds.objective_lip * kf * (kf - 1.0) * delta / 2.0;
    if k_stages >= 2 {
        total += n_rest * saa_epsilon1(eta / (kf - 1.0), m_paths, k_stages)?;
    }
    total += n_rest * ((2.0 / eta).ln() / (2.0 * m)).sqrt();
    Ok(total)
}

/// Confidence interval for the exact optimal expected sample size,
/// with the shifted designs that produced each endpoint.
#[derive(Debug, Clone)]
pub struct ValueInterval {
    /// Interval endpoints; `-inf` / `+inf` when a shifted solve
    /// produced no design.
    pub lower: f64,
    pub upper: f64,
    /// Budget deviation radius applied to both shifted problems.
    pub eps: f64,
    /// Grid concentration radius at the requested `eta`.
    pub eps1: f64,
    /// Objective deviation radius subtracted from the lower endpoint.
    pub eps_f: f64,
    /// Cutoff grid spacing.
    pub delta: f64,
    /// Design from the budget-relaxed solve and its exact cost.
    pub relaxed_cutoffs: Option<CutoffVector>,
    pub relaxed_exact: Option<f64>,
    /// Design from the budget-tightened solve and its exact cost.
    pub tightened_cutoffs: Option<CutoffVector>,
    pub tightened_exact: Option<f64>,
}

/// Bracket the exact optimal expected sample size between two shifted
/// sample-average solves.
///
/// The relaxed problem (budgets enlarged by `eps`) admits every
/// exactly-feasible design with probability `1 - eta`-ish, so the exact
/// cost of its solution minus `eps_f` lower-bounds the optimum; the
/// tightened problem (budgets shrunk by `eps`) only admits designs that
/// are exactly feasible, so the exact cost of its solution
/// upper-bounds the optimum. An infeasible tightened problem leaves the
/// upper endpoint at `+inf`; budgets that would go negative are
/// infeasible outright. Exact costs come from the stagewise Gaussian
/// recursion, so only Gaussian statistic families are supported.
pub fn saa_value_interval(
    spec: &DesignSpec,
    m_paths: usize,
    seed: u64,
    eta: f64,
    params: &SolverParams,
    bounds: Option<DensityBounds>,
) -> Result<ValueInterval> {
    check_eta(eta)?;
    if !matches!(spec.family, TestFamily::Z { .. }) {
        return Err(Error::validation(
            "exact objective evaluation needs a Gaussian statistic family",
        ));
    }
    let bounds = match bounds {
        Some(b) => b,
        None => gaussian_defaults(spec)?,
    };
    let null = generate_paths(spec, Hypothesis::Null, m_paths, seed, StreamClass::Train)?;
    let alt = generate_paths(spec, Hypothesis::Alt, m_paths, seed, StreamClass::Train)?;
    let problem = SaaProblem::new(spec.clone(), null, alt, None)?;
    let (lo, hi, _) = effective_box(&problem, params.theta_box)?;
    let k_stages = problem.k_stages();
    let radii = saa_epsilon(eta, m_paths, k_stages, (lo, hi), &bounds)?;
    let eps_f = saa_epsilon_f(eta, m_paths, spec, (lo, hi), &bounds)?;
    let mut solver = params.clone();
    solver.theta_box = Some((lo, hi));

    let mut relaxed = problem.clone();
    relaxed.alpha_tilde = (relaxed.alpha_tilde + radii.eps).min(1.0);
    relaxed.beta = (relaxed.beta + radii.eps).min(1.0);
    let relaxed_out = solve_problem(relaxed, &solver)?;
    let relaxed_cutoffs = relaxed_out.cutoffs;
    let relaxed_exact = match &relaxed_cutoffs {
        Some(c) => Some(exact_expected_samples(spec, c)?),
        None => None,
    };
    let lower = relaxed_exact.map_or(f64::NEG_INFINITY, |v| v - eps_f);

    let shrunk_alpha = problem.alpha_tilde - radii.eps;
    let shrunk_beta = problem.beta - radii.eps;
    let (tightened_cutoffs, tightened_exact) = if shrunk_alpha < 0.0 || shrunk_beta < 0.0 {
        (None, None)
    } else {
        let mut tightened = problem.clone();
        tightened.alpha_tilde = shrunk_alpha;
        tightened.beta = shrunk_beta;
        let out = solve_problem(tightened, &solver)?;
        match out.cutoffs {
            Some(c) => {
                let exact = exact_expected_samples(spec, &c)?;
                (Some(c), Some(exact))
            }
            None => (None, None),
        }
    };
    let upper = tightened_exact.unwrap_or(f64::INFINITY);

    Ok(ValueInterval {
        lower,
        upper,
        eps: radii.eps,
        eps1: radii.eps1,
        eps_f,
        delta: radii.delta,
        relaxed_cutoffs,
        relaxed_exact,
        tightened_cutoffs,
        tightened_exact,
    })
}

/// Exact expected sample size of a single-boundary design under the
/// alternative, via the stagewise Gaussian recursion.
fn exact_expected_samples(spec: &DesignSpec, cutoffs: &CutoffVector) -> Result<f64> {
    let CutoffVector::Standard { thresholds } = cutoffs else {
        return Err(Error::validation(
            "exact objective evaluation covers single-boundary designs",
        ));
    };
    let drift = spec.drift_alt().ok_or_else(|| {
        Error::validation("exact objective evaluation needs a known standardized drift")
    })?;
    let sizes = &spec.stage_sizes;
    let mut ess = f64::from(sizes[0]);
    if sizes.len() == 1 {
        return Ok(ess);
    }
    let regions = match spec.sidedness {
        Sidedness::One => StageRegions::one_sided_upper(thresholds),
        Sidedness::Two => StageRegions::two_sided(thresholds),
    };
    let probs = sequential_probs(
        &spec.stages_cum(),
        drift,
        &regions,
        &RecursionGrid::default(),
    )?;
    for (j, &n) in sizes.iter().enumerate().skip(1) {
        ess += f64::from(n) * probs.noncross[j - 1];
    }
    Ok(ess)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_spec(stage_sizes: Vec<u32>, alpha: f64, beta: f64) -> DesignSpec {
        DesignSpec {
            family: TestFamily::Z {
                mu_alt: 0.5,
                sigma: 1.0,
            },
            sidedness: Sidedness::One,
            stage_sizes,
            alpha,
            alpha_buffer: None,
            beta,
            lambda: 1.0,
        }
    }

    #[test]
    fn grid_radius_matches_direct_formula_evaluation() {
        // sqrt(ln(4 * 10 / 0.05) / 200) with ceil(sqrt(100)) = 10 cells.
        let v = saa_epsilon1(0.05, 100, 1).unwrap();
        assert!((v - 0.18281974).abs() < 1e-6, "got {v}");
        // Two stages square the cell count: 10^2 = 100 cells.
        let v2 = saa_epsilon1(0.05, 100, 2).unwrap();
        let want = ((4.0_f64 * 100.0 / 0.05).ln() / 200.0).sqrt();
        assert!((v2 - want).abs() < 1e-12);
    }

    #[test]
    fn quadrupling_paths_roughly_halves_the_radius() {
        for (m, k) in [(100usize, 1usize), (100, 2), (10_000, 1), (10_000, 3), (1_000_000, 1)] {
            let base = saa_epsilon1(0.05, m, k).unwrap();
            let finer = saa_epsilon1(0.05, 4 * m, k).unwrap();
            let ratio = finer / base;
            assert!(
                ratio > 0.5 && ratio < 0.62,
                "ratio {ratio} at M={m}, K={k}"
            );
        }
        let r1 = saa_epsilon1(0.05, 400, 1).unwrap() / saa_epsilon1(0.05, 100, 1).unwrap();
        assert!((r1 - 0.5253).abs() < 1e-3, "got {r1}");
        let r2 = saa_epsilon1(0.05, 400, 2).unwrap() / saa_epsilon1(0.05, 100, 2).unwrap();
        assert!((r2 - 0.5372).abs() < 1e-3, "got {r2}");
    }

    #[test]
    fn eta_domain_is_the_half_open_unit_interval() {
        assert!(saa_epsilon1(1.0, 100, 1).is_ok());
        for bad in [0.0, 1.5, -1.0, f64::NAN] {
            assert!(saa_epsilon1(bad, 100, 1).is_err(), "eta {bad} accepted");
        }
        assert!(saa_epsilon1(0.1, 0, 1).is_err());
        assert!(saa_epsilon1(0.1, 100, 0).is_err());
    }

    #[test]
    fn budget_radius_matches_hand_computation() {
        let spec = z_spec(vec![50, 50], 0.05, 0.95);
        let bounds = gaussian_defaults(&spec).unwrap();
        let radii = saa_epsilon(0.2, 400, 2, (-10.0, 10.0), &bounds).unwrap();
        // 2 * sqrt(ln(4 * 400 / 0.05) / 800) + 3/sqrt(2 pi) * 2 * 20 / 20.
        assert!((radii.eps - 2.6213978).abs() < 1e-4, "got {}", radii.eps);
        assert_eq!(radii.delta, 1.0);
        assert_eq!(radii.eps1, saa_epsilon1(0.2, 400, 2).unwrap());
        assert!(saa_epsilon(0.2, 400, 2, (10.0, -10.0), &bounds).is_err());
        assert!(saa_epsilon(0.2, 400, 2, (0.0, f64::INFINITY), &bounds).is_err());
    }

    #[test]
    fn objective_radius_matches_hand_computation() {
        let spec = z_spec(vec![50, 50], 0.05, 0.95);
        let bounds = gaussian_defaults(&spec).unwrap();
        let v = saa_epsilon_f(0.2, 400, &spec, (0.0, 4.0), &bounds).unwrap();
        // 3.989423 + 5.299531 + 7.978846 + 5.299531 + 2.682459.
        assert!((v - 25.249784).abs() < 2e-4, "got {v}");
    }

    #[test]
    fn single_stage_objective_radius_vanishes() {
        let spec = z_spec(vec![25], 0.2, 1.0);
        let bounds = gaussian_defaults(&spec).unwrap();
        let v = saa_epsilon_f(0.2, 50, &spec, (-10.0, 10.0), &bounds).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn gaussian_envelopes_are_internally_consistent() {
        let spec = z_spec(vec![40, 30, 30], 0.05, 0.95);
        let b = gaussian_defaults(&spec).unwrap();
        let inv = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert_eq!(b.null_density_sup, inv);
        assert_eq!(b.alt_density_sup, inv);
        assert_eq!(b.null_density_lip, 2.0 * inv);
        assert_eq!(b.alt_density_lip, 2.0 * inv);
        assert_eq!(b.objective_sup, 60.0 * inv);
        assert_eq!(b.objective_lip, 120.0 * inv);

        let custom = DesignSpec {
            family: TestFamily::Custom {
                label: "external".into(),
            },
            ..z_spec(vec![40, 30, 30], 0.05, 0.95)
        };
        assert!(gaussian_defaults(&custom).is_err());
    }

    #[test]
    fn single_stage_interval_is_exact_below_and_open_above() {
        // One stage: the objective is the committed size no matter the
        // cutoff, and the radii at this tiny M dwarf the budgets, so the
        // tightened problem is infeasible outright.
        let spec = z_spec(vec![25], 0.2, 1.0);
        let iv = saa_value_interval(&spec, 50, 1, 0.2, &SolverParams::default(), None).unwrap();
        assert_eq!(iv.lower, 25.0);
        assert_eq!(iv.relaxed_exact, Some(25.0));
        assert!(iv.upper.is_infinite() && iv.upper > 0.0);
        assert!(iv.tightened_cutoffs.is_none());
        assert!(iv.eps > 0.0 && iv.eps_f == 0.0);
    }
}
