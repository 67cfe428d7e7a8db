//! Replay of group sequential designs over two-arm binary trial data.
//!
//! Given recorded 0/1 outcomes for a control and a treatment arm, the
//! replay walks the design's analysis schedule in patient order, computes
//! the two-proportion statistic at every interim analysis, and stops the
//! first time a cutoff is crossed. A permutation study repeats the walk
//! under independent random reorderings of each arm to estimate how many
//! samples the design consumes on average over arrival orders.
//!
//! One caveat worth keeping in mind: cutoffs for replayed comparisons are
//! typically designed with alternative rates estimated from the very
//! dataset being replayed, which is mildly in-sample and flatters every
//! design equally. Consumption comparisons between designs remain fair;
//! absolute error rates do not transfer out of sample.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::Error;
use crate::sampling::{PathRng, Sidedness};
use crate::Result;

/// Sentinel seed that makes every permutation the identity, turning a
/// permutation study into a repeated fixed replay (testing hook).
pub const IDENTITY_SEED: u64 = u64::MAX;

/// Recorded outcomes of a two-arm trial with binary endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialData {
    pub control: Vec<u8>,
    pub treatment: Vec<u8>,
}

impl TrialData {
    pub fn new(control: Vec<u8>, treatment: Vec<u8>) -> Result<Self> {
        let data = TrialData { control, treatment };
        data.validate()?;
        Ok(data)
    }

    pub fn validate(&self) -> Result<()> {
        for (arm, values) in [("control", &self.control), ("treatment", &self.treatment)] {
            if values.is_empty() {
                return Err(Error::validation(format!("{arm} arm has no outcomes")));
            }
            if let Some(i) = values.iter().position(|&v| v > 1) {
                return Err(Error::validation(format!(
                    "{arm} arm entry {} is {}, outcomes must be 0 or 1",
                    i + 1,
                    values[i]
                )));
            }
        }
        Ok(())
    }
}

/// Verdict of a fixed replay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Reject,
    NoReject,
}

/// What one walk over the schedule produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayResult {
    /// First stage (1-based) whose cutoff was crossed; `None` when the
    /// trial ran to the end without rejecting.
    pub stop_stage: Option<usize>,
    pub decision: Decision,
    /// Statistics of the stages actually analyzed, in order.
    pub stats: Vec<f64>,
    /// Total observations used across both arms: twice the per-arm
    /// cumulative schedule through the stopping stage.
    pub consumed: u64,
}

/// Read one arm's outcomes from a CSV file with an `outcome` column.
///
/// Any other columns (an `id` column, say) are ignored. Row order is
/// preserved. A non-binary outcome fails with the offending line number.
fn load_arm_csv(path: &Path) -> Result<Vec<u8>> {
    let show = path.display();
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::parse(format!("{show}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(format!("{show}: {e}")))?;
    let outcome_col = headers
        .iter()
        .position(|h| h.trim() == "outcome")
        .ok_or_else(|| {
            Error::parse(format!(
                "{show}: no 'outcome' column (found: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(format!("{show}: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        let field = record.get(outcome_col).ok_or_else(|| {
            Error::parse(format!("{show} line {line}: row is missing the outcome field"))
        })?;
        match field.trim() {
            "0" => values.push(0),
            "1" => values.push(1),
            other => {
                return Err(Error::parse(format!(
                    "{show} line {line}: outcome '{other}' is not 0 or 1"
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(Error::parse(format!("{show}: file has no outcome rows")));
    }
    Ok(values)
}

/// Load a trial from per-arm CSV files (see [`TrialData`]).
pub fn load_trial_csv(control_path: &Path, treatment_path: &Path) -> Result<TrialData> {
    TrialData::new(load_arm_csv(control_path)?, load_arm_csv(treatment_path)?)
}

/// Standardized two-proportion statistic after `n_cum` observations per
/// arm. With `n = 2 * n_cum` the total sample count,
///
/// ```text
/// S = (p_t - p_c) / sqrt(2 p_t (1 - p_t) / n + 2 p_c (1 - p_c) / n)
/// ```
///
/// which is the classical unpooled two-sample proportion z-statistic,
/// positive when the treatment arm's success rate is higher. When both
/// proportions are degenerate *and* equal (all zeros or all ones in both
/// arms) the statistic is 0 by convention; a zero denominator with a
/// nonzero numerator is a degenerate-variance error.
pub fn two_prop_stat(
    control_successes: u64,
    treatment_successes: u64,
    n_cum: u64,
) -> Result<f64> {
    if n_cum == 0 {
        return Err(Error::validation("two-proportion statistic needs n >= 1"));
    }
    for (arm, s) in [
        ("control", control_successes),
        ("treatment", treatment_successes),
    ] {
        if s > n_cum {
            return Err(Error::validation(format!(
                "{arm} arm has {s} successes out of {n_cum} observations"
            )));
        }
    }
    let n = n_cum as f64;
    let p_c = control_successes as f64 / n;
    let p_t = treatment_successes as f64 / n;
    let numerator = p_t - p_c;
    // 2 p q / (2 n_cum) per arm: the unpooled variance of the difference.
    let variance = (p_t * (1.0 - p_t) + p_c * (1.0 - p_c)) / n;
    if variance == 0.0 {
        return if numerator == 0.0 {
            Ok(0.0)
        } else {
            Err(Error::numerical(format!(
                "degenerate variance: proportions {p_t} vs {p_c} with no spread"
            )))
        };
    }
    Ok(numerator / variance.sqrt())
}

fn check_replay_inputs(
    data: &TrialData,
    thresholds: &[f64],
    schedule: &[u32],
) -> Result<Vec<u64>> {
    data.validate()?;
    if schedule.is_empty() {
        return Err(Error::validation("schedule needs at least one stage"));
    }
    if thresholds.len() != schedule.len() {
        return Err(Error::validation(format!(
            "{} cutoffs for {} stages",
            thresholds.len(),
            schedule.len()
        )));
    }
    if schedule.iter().any(|&n| n == 0) {
        return Err(Error::validation("stage sizes must be positive"));
    }
    if thresholds.iter().any(|t| t.is_nan()) {
        return Err(Error::validation("cutoffs must not be NaN"));
    }
    let mut cums = Vec::with_capacity(schedule.len());
    let mut acc = 0u64;
    for &n in schedule {
        acc += n as u64;
        cums.push(acc);
    }
    let arm_capacity = data.control.len().min(data.treatment.len()) as u64;
    if let Some(k) = cums.iter().position(|&c| c > arm_capacity) {
        return Err(Error::validation(format!(
            "stage {} needs {} observations per arm but the shorter arm has {}",
            k + 1,
            cums[k],
            arm_capacity
        )));
    }
    Ok(cums)
}

/// Walk the schedule over the data in the stored patient order and stop
/// at the first stage whose statistic meets its cutoff (`S_k >= theta_k`
/// one-sided, `|S_k| >= theta_k` two-sided).
///
/// Per-arm stage sizes are equal across arms; both arms must hold at
/// least the full cumulative schedule.
pub fn replay_fixed(
    data: &TrialData,
    thresholds: &[f64],
    schedule: &[u32],
    sidedness: Sidedness,
) -> Result<ReplayResult> {
    let cums = check_replay_inputs(data, thresholds, schedule)?;
    let mut stats = Vec::with_capacity(schedule.len());
    let mut control_successes = 0u64;
    let mut treatment_successes = 0u64;
    let mut prev = 0usize;
    for (k, &cum) in cums.iter().enumerate() {
        let cum_us = cum as usize;
        control_successes += data.control[prev..cum_us]
            .iter()
            .map(|&v| v as u64)
            .sum::<u64>();
        treatment_successes += data.treatment[prev..cum_us]
            .iter()
            .map(|&v| v as u64)
            .sum::<u64>();
        prev = cum_us;
        let s = two_prop_stat(control_successes, treatment_successes, cum)?;
        stats.push(s);
        let observed = if sidedness.is_two() { s.abs() } else { s };
        if observed >= thresholds[k] {
            return Ok(ReplayResult {
                stop_stage: Some(k + 1),
                decision: Decision::Reject,
                stats,
                consumed: 2 * cum,
            });
        }
    }
    Ok(ReplayResult {
        stop_stage: None,
        decision: Decision::NoReject,
        stats,
        consumed: 2 * cums.last().expect("schedule is nonempty"),
    })
}

/// Unbiased draw from `0..bound` (Lemire's multiply-shift rejection).
fn uniform_below(rng: &mut PathRng, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = (rng.next_u64() as u128) * (bound as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

fn shuffle(rng: &mut PathRng, values: &mut [u8]) {
    for i in (1..values.len()).rev() {
        let j = uniform_below(rng, (i + 1) as u64) as usize;
        values.swap(i, j);
    }
}

/// Aggregate of a permutation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationSummary {
    pub n_perm: usize,
    /// Mean total samples consumed across permutations.
    pub mean_consumed: f64,
    /// Standard error of that mean (0 for a single permutation).
    pub se_consumed: f64,
    /// `stop_counts[k-1]` permutations rejected at stage `k`; the final
    /// entry counts permutations that never rejected.
    pub stop_counts: Vec<usize>,
}

impl PermutationSummary {
    /// Fraction of permutations that ended in rejection.
    pub fn reject_fraction(&self) -> f64 {
        let never = *self.stop_counts.last().expect("histogram is nonempty");
        (self.n_perm - never) as f64 / self.n_perm as f64
    }

    /// Single-row CSV: consumption summary plus the stop histogram.
    pub fn to_csv(&self) -> String {
        let stages = self.stop_counts.len() - 1;
        let mut header = vec![
            "n_perm".to_string(),
            "mean_consumed".to_string(),
            "se_consumed".to_string(),
            "reject_fraction".to_string(),
        ];
        let mut row = vec![
            self.n_perm.to_string(),
            self.mean_consumed.to_string(),
            self.se_consumed.to_string(),
            self.reject_fraction().to_string(),
        ];
        for k in 1..=stages {
            header.push(format!("stops_stage_{k}"));
            row.push(self.stop_counts[k - 1].to_string());
        }
        header.push("no_reject".to_string());
        row.push(self.stop_counts[stages].to_string());
        format!("{}\n{}\n", header.join(","), row.join(","))
    }
}

/// Replay the design under `n_perm` independent uniform reorderings of
/// each arm and summarize the samples consumed.
///
/// Permutation `i` shuffles each arm with its own stream keyed by
/// `(seed, i, arm)`, so results are reproducible and independent of
/// thread scheduling. Passing [`IDENTITY_SEED`] skips the shuffles,
/// making every permutation replay the original order.
pub fn permutation_study(
    data: &TrialData,
    thresholds: &[f64],
    schedule: &[u32],
    sidedness: Sidedness,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationSummary> {
    if n_perm == 0 {
        return Err(Error::validation("permutation study needs n_perm >= 1"));
    }
    check_replay_inputs(data, thresholds, schedule)?;
    let k_stages = schedule.len();
    let results: Vec<Result<(u64, usize)>> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut permuted = data.clone();
            if seed != IDENTITY_SEED {
                let mut rng_c = PathRng::for_label(seed, b"replay.permutation.control", i as u64);
                shuffle(&mut rng_c, &mut permuted.control);
                let mut rng_t =
                    PathRng::for_label(seed, b"replay.permutation.treatment", i as u64);
                shuffle(&mut rng_t, &mut permuted.treatment);
            }
            let result = replay_fixed(&permuted, thresholds, schedule, sidedness)?;
            Ok((result.consumed, result.stop_stage.unwrap_or(k_stages + 1)))
        })
        .collect();

    let mut consumed = Vec::with_capacity(n_perm);
    let mut stop_counts = vec![0usize; k_stages + 1];
    for r in results {
        let (c, stop) = r?;
        consumed.push(c as f64);
        stop_counts[stop - 1] += 1;
    }
    let mean = consumed.iter().sum::<f64>() / n_perm as f64;
    let se = if n_perm == 1 {
        0.0
    } else {
        let ss: f64 = consumed.iter().map(|c| (c - mean) * (c - mean)).sum();
        (ss / (n_perm as f64 - 1.0) / n_perm as f64).sqrt()
    };
    Ok(PermutationSummary {
        n_perm,
        mean_consumed: mean,
        se_consumed: se,
        stop_counts,
    })
}

/// Deterministic synthetic two-arm dataset with independent Bernoulli
/// outcomes, for demonstrations and tests when no recorded trial is
/// available.
pub fn synthetic_two_arm(
    p_control: f64,
    p_treatment: f64,
    n_control: usize,
    n_treatment: usize,
    seed: u64,
) -> Result<TrialData> {
    for (name, p) in [("control", p_control), ("treatment", p_treatment)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::validation(format!(
                "{name} success rate must be in [0,1], got {p}"
            )));
        }
    }
    if n_control == 0 || n_treatment == 0 {
        return Err(Error::validation("both arms need at least one outcome"));
    }
    let draw = |label: &[u8], p: f64, n: usize| -> Vec<u8> {
        let mut rng = PathRng::for_label(seed, label, 0);
        (0..n).map(|_| u8::from(rng.uniform() < p)).collect()
    };
    TrialData::new(
        draw(b"replay.synthetic.control", p_control, n_control),
        draw(b"replay.synthetic.treatment", p_treatment, n_treatment),
    )
}
