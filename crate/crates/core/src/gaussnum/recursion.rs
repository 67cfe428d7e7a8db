//! Stagewise density recursion for sequential Gaussian statistics.
//!
//! Work happens on the cumulative-sum scale `B_k = sqrt(n_{1:k}) S_k`,
//! where stage increments are independent `N(d * n_k, n_k)` for per-sample
//! standardized drift `d`. The subdensity of paths that stayed inside every
//! continuation interval so far is carried on a per-stage Simpson grid;
//! exit probabilities integrate the increment cdf against that subdensity,
//! so single-stage results are exact up to cdf precision and no grid
//! interpolation is ever needed (each stage rebuilds its own grid).

use super::normal::{std_normal_cdf, std_normal_pdf};
use crate::error::Error;
use crate::Result;

/// Per-stage continuation intervals on the statistic scale.
///
/// Stage `k` continues while `lo[k] <= S_k <= hi[k]`. Bounds may be
/// infinite. A zero-width interval at the final stage models designs that
/// decide between the two exit directions with no continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRegions {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StageRegions {
    /// One-sided design: continue while `S_k <= theta_k`.
    pub fn one_sided_upper(theta: &[f64]) -> Self {
        StageRegions {
            lo: vec![f64::NEG_INFINITY; theta.len()],
            hi: theta.to_vec(),
        }
    }

    /// Two-sided design on the signed path: continue while `|S_k| <= theta_k`.
    pub fn two_sided(theta: &[f64]) -> Self {
        StageRegions {
            lo: theta.iter().map(|t| -t).collect(),
            hi: theta.to_vec(),
        }
    }

    /// Explicit bands, one `(lo, hi)` pair per stage.
    pub fn bands(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        StageRegions { lo, hi }
    }

    pub fn stages(&self) -> usize {
        self.lo.len()
    }

    fn validate(&self, k_expected: usize) -> Result<()> {
        if self.lo.len() != self.hi.len() || self.lo.len() != k_expected {
            return Err(Error::validation(format!(
                "regions cover {} stages, schedule has {}",
                self.lo.len(),
                k_expected
            )));
        }
        for (k, (&l, &h)) in self.lo.iter().zip(&self.hi).enumerate() {
            if l.is_nan() || h.is_nan() || l > h {
                return Err(Error::validation(format!(
                    "stage {} region ({l}, {h}) is not a valid interval",
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Quadrature controls for the recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecursionGrid {
    /// Points per stage grid; must be odd and at least 3.
    pub points: usize,
    /// Grid half-width in marginal standard deviations.
    pub half_width: f64,
}

impl Default for RecursionGrid {
    fn default() -> Self {
        RecursionGrid {
            points: 513,
            half_width: 8.0,
        }
    }
}

impl RecursionGrid {
    fn validate(&self) -> Result<()> {
        if self.points < 3 || self.points % 2 == 0 {
            return Err(Error::validation(format!(
                "grid points must be odd and >= 3, got {}",
                self.points
            )));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::validation(format!(
                "grid half-width must be positive, got {}",
                self.half_width
            )));
        }
        Ok(())
    }
}

/// Stagewise probabilities of a sequential Gaussian path.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialProbs {
    /// P(path inside its region at every stage up to and including k).
    pub noncross: Vec<f64>,
    /// P(first exit happens at stage k, through the upper edge).
    pub cross_upper: Vec<f64>,
    /// P(first exit happens at stage k, through the lower edge).
    pub cross_lower: Vec<f64>,
}

impl SequentialProbs {
    /// Cumulative exit probability through stage k (either edge).
    pub fn cumulative_exit(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.cross_upper
            .iter()
            .zip(&self.cross_lower)
            .map(|(u, l)| {
                acc += u + l;
                acc
            })
            .collect()
    }
}

/// Noncrossing and first-crossing probabilities for every stage.
///
/// `stages_cum` holds cumulative sizes `n_{1:k}` (strictly increasing,
/// positive); `drift` is the per-sample standardized drift, so the stage-k
/// statistic is `N(drift * sqrt(n_{1:k}), 1)` marginally.
pub fn sequential_probs(
    stages_cum: &[f64],
    drift: f64,
    regions: &StageRegions,
    grid: &RecursionGrid,
) -> Result<SequentialProbs> {
    let mut state = RecursionState::new(stages_cum, drift, *grid)?;
    regions.validate(stages_cum.len())?;
    let k_total = stages_cum.len();
    let mut out = SequentialProbs {
        noncross: Vec::with_capacity(k_total),
        cross_upper: Vec::with_capacity(k_total),
        cross_lower: Vec::with_capacity(k_total),
    };
    for k in 0..k_total {
        let (stay, up, lo) = state.exit_probs(regions.lo[k], regions.hi[k]);
        out.noncross.push(stay);
        out.cross_upper.push(up);
        out.cross_lower.push(lo);
        if k + 1 < k_total {
            state.advance(regions.lo[k], regions.hi[k]);
        }
    }
    Ok(out)
}

/// Incremental recursion: holds the survivor subdensity after the stages
/// committed so far and answers next-stage exit probabilities for candidate
/// regions in O(grid) without committing them.
pub(crate) struct RecursionState {
    stages_cum: Vec<f64>,
    drift: f64,
    grid: RecursionGrid,
    /// Stages committed so far.
    k: usize,
    /// Grid abscissae on the B scale, empty when no mass survives.
    u: Vec<f64>,
    /// Simpson weights matching `u`.
    w: Vec<f64>,
    /// Survivor subdensity values at `u`.
    f: Vec<f64>,
}

impl RecursionState {
    pub(crate) fn new(stages_cum: &[f64], drift: f64, grid: RecursionGrid) -> Result<Self> {
        grid.validate()?;
        if stages_cum.is_empty() {
            return Err(Error::validation("schedule must have at least one stage"));
        }
        let mut prev = 0.0;
        for (k, &n) in stages_cum.iter().enumerate() {
            if !(n > prev) || !n.is_finite() {
                return Err(Error::validation(format!(
                    "cumulative sizes must be positive and strictly increasing, stage {} has {n}",
                    k + 1
                )));
            }
            prev = n;
        }
        if !drift.is_finite() {
            return Err(Error::validation(format!("drift must be finite, got {drift}")));
        }
        Ok(RecursionState {
            stages_cum: stages_cum.to_vec(),
            drift,
            grid,
            k: 0,
            u: Vec::new(),
            w: Vec::new(),
            f: Vec::new(),
        })
    }

    /// Exit probabilities for stage `k+1` with region `(lo_s, hi_s)` on the
    /// statistic scale: returns (stay inside, exit upper, exit lower).
    pub(crate) fn exit_probs(&self, lo_s: f64, hi_s: f64) -> (f64, f64, f64) {
        let n_cum = self.stages_cum[self.k];
        let scale = n_cum.sqrt();
        let (lo_b, hi_b) = (lo_s * scale, hi_s * scale);
        if self.k == 0 {
            // Single Gaussian stage: exact through the cdf.
            let m = self.drift * n_cum;
            let s = scale;
            let p_hi = cdf_or_limit(hi_b, m, s);
            let p_lo = cdf_or_limit(lo_b, m, s);
            return ((p_hi - p_lo).max(0.0), 1.0 - p_hi, p_lo);
        }
        if self.f.is_empty() {
            return (0.0, 0.0, 0.0);
        }
        let n_inc = n_cum - self.stages_cum[self.k - 1];
        let m_inc = self.drift * n_inc;
        let s_inc = n_inc.sqrt();
        let (mut stay, mut up, mut lo) = (0.0, 0.0, 0.0);
        for i in 0..self.u.len() {
            let mass = self.w[i] * self.f[i];
            let shifted = self.u[i] + m_inc;
            let p_hi = cdf_or_limit(hi_b, shifted, s_inc);
            let p_lo = cdf_or_limit(lo_b, shifted, s_inc);
            stay += mass * (p_hi - p_lo).max(0.0);
            up += mass * (1.0 - p_hi);
            lo += mass * p_lo;
        }
        (stay, up, lo)
    }

    /// Commit region `(lo_s, hi_s)` for stage `k+1` and rebuild the survivor
    /// subdensity on a fresh grid.
    pub(crate) fn advance(&mut self, lo_s: f64, hi_s: f64) {
        let n_cum = self.stages_cum[self.k];
        let scale = n_cum.sqrt();
        let mean = self.drift * n_cum;
        let lo_b = (lo_s * scale).max(mean - self.grid.half_width * scale);
        let hi_b = (hi_s * scale).min(mean + self.grid.half_width * scale);
        if !(hi_b > lo_b) || (self.k > 0 && self.f.is_empty()) {
            // No region mass within resolution; later stages see zero.
            self.u.clear();
            self.w.clear();
            self.f.clear();
            self.k += 1;
            return;
        }
        let g = self.grid.points;
        let h = (hi_b - lo_b) / (g - 1) as f64;
        let new_u: Vec<f64> = (0..g).map(|i| lo_b + h * i as f64).collect();
        let new_w = simpson_weights(g, h);
        let new_f: Vec<f64> = if self.k == 0 {
            let s = scale;
            new_u
                .iter()
                .map(|&b| std_normal_pdf((b - mean) / s) / s)
                .collect()
        } else {
            let n_inc = n_cum - self.stages_cum[self.k - 1];
            let m_inc = self.drift * n_inc;
            let s_inc = n_inc.sqrt();
            new_u
                .iter()
                .map(|&b| {
                    let mut acc = 0.0;
                    for i in 0..self.u.len() {
                        let z = (b - self.u[i] - m_inc) / s_inc;
                        acc += self.w[i] * self.f[i] * std_normal_pdf(z);
                    }
                    acc / s_inc
                })
                .collect()
        };
        self.u = new_u;
        self.w = new_w;
        self.f = new_f;
        self.k += 1;
    }
}

/// Gaussian cdf with explicit handling of infinite endpoints.
fn cdf_or_limit(x: f64, mean: f64, sd: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        std_normal_cdf((x - mean) / sd)
    }
}

fn simpson_weights(g: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; g];
    let c = h / 3.0;
    w[0] = c;
    w[g - 1] = c;
    for (i, wi) in w.iter_mut().enumerate().take(g - 1).skip(1) {
        *wi = if i % 2 == 1 { 4.0 * c } else { 2.0 * c };
    }
    w
}
