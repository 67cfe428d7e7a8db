//! Alpha-spending schedules and spending-matched boundaries.
//!
//! A spending schedule fixes the cumulative type-1 budget `a(k)` used
//! through analysis k, with `a(K) = alpha`. [`boundaries_from_spending`]
//! finds stage cutoffs whose exact first-crossing probabilities under the
//! null match the per-stage increments `a(k) - a(k-1)`, by stagewise
//! bisection against the density recursion.

use super::recursion::{RecursionGrid, RecursionState, StageRegions};
use super::{sequential_probs, std_normal_cdf, std_normal_quantile};
use crate::error::Error;
use crate::Result;

/// Classical spending-function families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpendingKind {
    /// Linear spending `alpha * k / K`.
    LanDeMets,
    /// `alpha * ln(1 + (e - 1) k / K)`.
    Pocock,
    /// `1 - Phi(z_{1-alpha} / sqrt(k/K))`, doubled for two-sided designs.
    OBrienFleming,
}

impl SpendingKind {
    pub fn label(&self) -> &'static str {
        match self {
            SpendingKind::LanDeMets => "lan-demets",
            SpendingKind::Pocock => "pocock",
            SpendingKind::OBrienFleming => "obf",
        }
    }
}

impl std::str::FromStr for SpendingKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lan-demets" | "lan_demets" | "ld" => Ok(SpendingKind::LanDeMets),
            "pocock" => Ok(SpendingKind::Pocock),
            "obf" | "obrien-fleming" | "o'brien-fleming" => Ok(SpendingKind::OBrienFleming),
            other => Err(Error::validation(format!("unknown spending kind '{other}'"))),
        }
    }
}

/// Cumulative alpha spend through analysis `k` of `k_total`.
///
/// Exactly `alpha` at the final analysis for every kind.
pub fn spending_alpha(
    kind: SpendingKind,
    alpha: f64,
    k: usize,
    k_total: usize,
    two_sided: bool,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("alpha must be in (0,1), got {alpha}")));
    }
    if k == 0 || k > k_total {
        return Err(Error::validation(format!(
            "analysis index {k} outside 1..={k_total}"
        )));
    }
    if k == k_total {
        return Ok(alpha);
    }
    let t = k as f64 / k_total as f64;
    Ok(match kind {
        SpendingKind::LanDeMets => alpha * t,
        SpendingKind::Pocock => alpha * ((std::f64::consts::E - 1.0) * t).ln_1p(),
        SpendingKind::OBrienFleming => {
            if two_sided {
                let z = std_normal_quantile(1.0 - alpha / 2.0)?;
                2.0 * (1.0 - std_normal_cdf(z / t.sqrt()))
            } else {
                let z = std_normal_quantile(1.0 - alpha)?;
                1.0 - std_normal_cdf(z / t.sqrt())
            }
        }
    })
}

/// Boundaries solved from a spending schedule.
#[derive(Debug, Clone)]
pub struct BoundaryResult {
    /// Stage cutoffs on the statistic scale.
    pub theta: Vec<f64>,
    /// Exact per-stage null crossing probability realized by `theta`.
    pub spend: Vec<f64>,
    /// Stages (1-based) where the increment was below integration
    /// resolution and the cutoff was clipped to the bracket top.
    pub clipped: Vec<usize>,
}

/// Solve cutoffs matching a named spending schedule.
///
/// `bracket` bounds the cutoff search; for two-sided designs the lower end
/// must be nonnegative since cutoffs act on `|S_k|`.
pub fn boundaries_from_spending(
    stages_cum: &[f64],
    kind: SpendingKind,
    alpha: f64,
    two_sided: bool,
    bracket: (f64, f64),
    grid: &RecursionGrid,
) -> Result<BoundaryResult> {
    let k_total = stages_cum.len();
    let cum: Vec<f64> = (1..=k_total)
        .map(|k| spending_alpha(kind, alpha, k, k_total, two_sided))
        .collect::<Result<_>>()?;
    boundaries_from_schedule(stages_cum, &cum, two_sided, bracket, grid)
}

/// Solve cutoffs matching an explicit cumulative spending schedule.
pub fn boundaries_from_schedule(
    stages_cum: &[f64],
    cum_spend: &[f64],
    two_sided: bool,
    bracket: (f64, f64),
    grid: &RecursionGrid,
) -> Result<BoundaryResult> {
    let k_total = stages_cum.len();
    if cum_spend.len() != k_total {
        return Err(Error::validation(format!(
            "spending schedule has {} entries for {} stages",
            cum_spend.len(),
            k_total
        )));
    }
    let mut prev = 0.0;
    for (k, &a) in cum_spend.iter().enumerate() {
        if !(a >= prev) || !(a < 1.0) {
            return Err(Error::validation(format!(
                "cumulative spend must be nondecreasing in [0,1), stage {} has {a}",
                k + 1
            )));
        }
        prev = a;
    }
    let (b_lo, b_hi) = bracket;
    if !(b_lo < b_hi) || !b_lo.is_finite() || !b_hi.is_finite() {
        return Err(Error::validation(format!(
            "bracket ({b_lo}, {b_hi}) must be a finite increasing pair"
        )));
    }
    if two_sided && b_lo < 0.0 {
        return Err(Error::validation(
            "two-sided cutoffs act on |S|; bracket must start at 0 or above",
        ));
    }

    let mut state = RecursionState::new(stages_cum, 0.0, *grid)?;
    let region = |theta: f64| -> (f64, f64) {
        if two_sided {
            (-theta, theta)
        } else {
            (f64::NEG_INFINITY, theta)
        }
    };
    let crossing = |state: &RecursionState, theta: f64| -> f64 {
        let (lo_s, hi_s) = region(theta);
        let (_, up, lo) = state.exit_probs(lo_s, hi_s);
        if two_sided {
            up + lo
        } else {
            up
        }
    };

    let mut theta = Vec::with_capacity(k_total);
    let mut spend = Vec::with_capacity(k_total);
    let mut clipped = Vec::new();
    let mut spent = 0.0;
    for k in 0..k_total {
        let target = cum_spend[k] - spent;
        spent = cum_spend[k];
        let at_top = crossing(&state, b_hi);
        let t_k = if target <= at_top {
            // Even the loosest cutoff spends more than requested: the
            // increment is below integration resolution.
            clipped.push(k + 1);
            b_hi
        } else if crossing(&state, b_lo) < target {
            clipped.push(k + 1);
            b_lo
        } else {
            let (mut lo, mut hi) = (b_lo, b_hi);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if crossing(&state, mid) > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-9 {
                    break;
                }
            }
            0.5 * (lo + hi)
        };
        spend.push(crossing(&state, t_k));
        theta.push(t_k);
        if k + 1 < k_total {
            let (lo_s, hi_s) = region(t_k);
            state.advance(lo_s, hi_s);
        }
    }
    Ok(BoundaryResult {
        theta,
        spend,
        clipped,
    })
}

/// Exact cumulative rejection probability under the null, stage by stage.
///
/// `reject_lower` counts lower-edge exits as rejections (two-sided
/// designs); otherwise only upper-edge exits spend budget.
pub fn alpha_budget_curve(
    stages_cum: &[f64],
    regions: &StageRegions,
    reject_lower: bool,
    grid: &RecursionGrid,
) -> Result<Vec<f64>> {
    let probs = sequential_probs(stages_cum, 0.0, regions, grid)?;
    let mut acc = 0.0;
    Ok((0..stages_cum.len())
        .map(|k| {
            acc += probs.cross_upper[k];
            if reject_lower {
                acc += probs.cross_lower[k];
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spending_matches_frozen_constants() {
        // Stage-1 spends for alpha = 0.05, K = 3, one-sided.
        let p = spending_alpha(SpendingKind::Pocock, 0.05, 1, 3, false).unwrap();
        assert!((p - 0.022642).abs() < 5e-6, "pocock stage 1: {p}");
        let o = spending_alpha(SpendingKind::OBrienFleming, 0.05, 1, 3, false).unwrap();
        assert!((o - 0.002192).abs() < 5e-6, "obf stage 1: {o}");
        let l = spending_alpha(SpendingKind::LanDeMets, 0.05, 1, 3, false).unwrap();
        assert_eq!(l, 0.05 * (1.0 / 3.0));
    }

    #[test]
    fn spending_is_exact_at_final_analysis() {
        for kind in [
            SpendingKind::LanDeMets,
            SpendingKind::Pocock,
            SpendingKind::OBrienFleming,
        ] {
            for two_sided in [false, true] {
                let a = spending_alpha(kind, 0.05, 4, 4, two_sided).unwrap();
                assert!((a - 0.05).abs() < 1e-12, "{kind:?} final spend {a}");
            }
        }
    }

    #[test]
    fn spending_is_monotone_in_k() {
        for kind in [
            SpendingKind::LanDeMets,
            SpendingKind::Pocock,
            SpendingKind::OBrienFleming,
        ] {
            let mut prev = 0.0;
            for k in 1..=6 {
                let a = spending_alpha(kind, 0.025, k, 6, true).unwrap();
                assert!(a > prev, "{kind:?} not increasing at {k}");
                prev = a;
            }
        }
    }

    #[test]
    fn single_stage_boundary_is_the_normal_quantile() {
        let grid = RecursionGrid::default();
        for kind in [
            SpendingKind::LanDeMets,
            SpendingKind::Pocock,
            SpendingKind::OBrienFleming,
        ] {
            let res =
                boundaries_from_spending(&[50.0], kind, 0.05, false, (-10.0, 10.0), &grid)
                    .unwrap();
            assert!(
                (res.theta[0] - 1.644_854).abs() < 1e-6,
                "{kind:?} gave {}",
                res.theta[0]
            );
            assert!(res.clipped.is_empty());
        }
    }

    #[test]
    fn solved_boundaries_reproduce_spending_increments() {
        let grid = RecursionGrid::default();
        let stages = [34.0, 67.0, 100.0];
        for kind in [
            SpendingKind::LanDeMets,
            SpendingKind::Pocock,
            SpendingKind::OBrienFleming,
        ] {
            let res =
                boundaries_from_spending(&stages, kind, 0.05, false, (-10.0, 10.0), &grid)
                    .unwrap();
            let mut prev = 0.0;
            for k in 1..=3 {
                let want = spending_alpha(kind, 0.05, k, 3, false).unwrap() - prev;
                prev += want;
                assert!(
                    (res.spend[k - 1] - want).abs() < 1e-6,
                    "{kind:?} stage {k}: spend {} target {want}",
                    res.spend[k - 1]
                );
            }
            // Total exact type-1 equals alpha.
            let curve = alpha_budget_curve(
                &stages,
                &StageRegions::one_sided_upper(&res.theta),
                false,
                &grid,
            )
            .unwrap();
            assert!((curve[2] - 0.05).abs() < 1e-6, "{kind:?} total {}", curve[2]);
        }
    }

    #[test]
    fn exhausted_schedule_clips_later_stages() {
        // All budget spent at stage 1: later cutoffs ride the bracket top.
        let grid = RecursionGrid::default();
        let res = boundaries_from_schedule(
            &[25.0, 50.0, 75.0],
            &[0.05, 0.05, 0.05],
            false,
            (-10.0, 10.0),
            &grid,
        )
        .unwrap();
        assert!((res.theta[0] - 1.644_854).abs() < 1e-6);
        assert_eq!(res.theta[1], 10.0);
        assert_eq!(res.theta[2], 10.0);
        assert_eq!(res.clipped, vec![2, 3]);
    }

    #[test]
    fn two_sided_boundaries_spend_both_edges() {
        let grid = RecursionGrid::default();
        let res = boundaries_from_spending(
            &[40.0, 80.0],
            SpendingKind::Pocock,
            0.05,
            true,
            (0.0, 10.0),
            &grid,
        )
        .unwrap();
        let curve = alpha_budget_curve(
            &[40.0, 80.0],
            &StageRegions::two_sided(&res.theta),
            true,
            &grid,
        )
        .unwrap();
        assert!((curve[1] - 0.05).abs() < 1e-6, "total two-sided {}", curve[1]);
    }

    #[test]
    fn rejects_invalid_schedules() {
        let grid = RecursionGrid::default();
        assert!(boundaries_from_schedule(&[10.0], &[0.1, 0.2], false, (-10.0, 10.0), &grid)
            .is_err());
        assert!(
            boundaries_from_schedule(&[10.0, 20.0], &[0.2, 0.1], false, (-10.0, 10.0), &grid)
                .is_err()
        );
        assert!(boundaries_from_schedule(&[10.0], &[0.05], true, (-1.0, 10.0), &grid).is_err());
        assert!(spending_alpha(SpendingKind::Pocock, 0.0, 1, 2, false).is_err());
        assert!(spending_alpha(SpendingKind::Pocock, 0.05, 0, 2, false).is_err());
    }
}
