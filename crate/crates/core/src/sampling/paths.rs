//! Path matrices and per-family generators.

use super::rng::{PathRng, StreamClass};
use super::spec::{DesignSpec, Hypothesis, TestFamily};
use crate::error::Error;
use crate::Result;
use rayon::prelude::*;
use std::io::Write;

/// Simulated statistic paths: `m_paths` rows over `stages_cum.len()` stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    pub hypothesis: Hypothesis,
    pub stream: StreamClass,
    pub seed: u64,
    /// Cumulative sample sizes `n_{1:k}`.
    pub stages_cum: Vec<f64>,
    pub m_paths: usize,
    /// True when rows hold `|S_k|` (two-sided designs).
    pub absolute: bool,
    values: Vec<f64>,
    /// Paths that had to be regenerated, with the attempt counter that
    /// finally produced a well-defined statistic.
    pub resampled: Vec<(usize, u32)>,
}

impl PathMatrix {
    pub fn k_stages(&self) -> usize {
        self.stages_cum.len()
    }

    /// Statistic of path `m` at stage `k` (both 0-based).
    pub fn value(&self, m: usize, k: usize) -> f64 {
        self.values[m * self.k_stages() + k]
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let k = self.k_stages();
        &self.values[m * k..(m + 1) * k]
    }

    /// All path values at one stage.
    pub fn stage_column(&self, k: usize) -> Vec<f64> {
        (0..self.m_paths).map(|m| self.value(m, k)).collect()
    }

    /// Wrap externally computed statistics in a path matrix: `values` is
    /// row-major with one row of `stages_cum.len()` stage statistics per
    /// path. Used for replayed trial data and hand-built fixtures.
    pub fn from_values(
        hypothesis: Hypothesis,
        stream: StreamClass,
        seed: u64,
        stages_cum: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self> {
        let k = stages_cum.len();
        if k == 0 {
            return Err(Error::validation("schedule must have at least one stage"));
        }
        if values.is_empty() || values.len() % k != 0 {
            return Err(Error::validation(format!(
                "{} values cannot form complete rows of {k} stages",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("path values must be finite"));
        }
        let m_paths = values.len() / k;
        Ok(PathMatrix {
            hypothesis,
            stream,
            seed,
            stages_cum,
            m_paths,
            absolute: false,
            values,
            resampled: Vec::new(),
        })
    }

    fn from_rows(
        hypothesis: Hypothesis,
        stream: StreamClass,
        seed: u64,
        stages_cum: Vec<f64>,
        rows: Vec<(Vec<f64>, u32)>,
    ) -> Self {
        let m_paths = rows.len();
        let mut values = Vec::with_capacity(m_paths * stages_cum.len());
        let mut resampled = Vec::new();
        for (m, (row, bump)) in rows.into_iter().enumerate() {
            values.extend_from_slice(&row);
            if bump > 0 {
                resampled.push((m, bump));
            }
        }
        PathMatrix {
            hypothesis,
            stream,
            seed,
            stages_cum,
            m_paths,
            absolute: false,
            values,
            resampled,
        }
    }

    fn apply_absolute(&mut self) {
        for v in &mut self.values {
            *v = v.abs();
        }
        self.absolute = true;
    }
}

fn check_spec_and_paths(spec: &DesignSpec, m_paths: usize) -> Result<()> {
    spec.validate()?;
    if m_paths == 0 {
        return Err(Error::validation("path count must be positive"));
    }
    Ok(())
}

/// z-statistic paths via the standardized random walk: increments of the
/// cumulative sum are independent `N(d n_k, n_k)` and `S_k` divides by
/// `sqrt(n_{1:k})`.
pub fn generate_z_paths(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
) -> Result<PathMatrix> {
    check_spec_and_paths(spec, m_paths)?;
    if !matches!(spec.family, TestFamily::Z { .. }) {
        return Err(Error::validation(format!(
            "z path generator called for family '{}'",
            spec.family.label()
        )));
    }
    gaussian_walk_paths(spec, hypothesis, m_paths, seed, stream)
}

/// Two-proportion paths under the asymptotic Gaussian law: the same
/// standardized walk as the z family with the standardized proportion
/// difference as per-sample drift (stage sizes are per arm).
pub fn generate_two_prop_paths(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
) -> Result<PathMatrix> {
    check_spec_and_paths(spec, m_paths)?;
    if !matches!(spec.family, TestFamily::TwoProp { .. }) {
        return Err(Error::validation(format!(
            "two-proportion path generator called for family '{}'",
            spec.family.label()
        )));
    }
    gaussian_walk_paths(spec, hypothesis, m_paths, seed, stream)
}

fn gaussian_walk_paths(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
) -> Result<PathMatrix> {
    let d = spec
        .drift_of(hypothesis)
        .ok_or_else(|| Error::validation("family has no closed-form drift"))?;
    let sizes: Vec<f64> = spec.stage_sizes.iter().map(|&n| n as f64).collect();
    let cums = spec.stages_cum();
    let rows: Vec<(Vec<f64>, u32)> = (0..m_paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = PathRng::for_path(seed, stream, hypothesis, m as u64);
            let mut b = 0.0;
            let row = sizes
                .iter()
                .zip(&cums)
                .map(|(&n, &cum)| {
                    b += d * n + n.sqrt() * rng.standard_normal();
                    b / cum.sqrt()
                })
                .collect();
            (row, 0)
        })
        .collect();
    let mut pm = PathMatrix::from_rows(hypothesis, stream, seed, cums, rows);
    if spec.sidedness.is_two() {
        pm.apply_absolute();
    }
    Ok(pm)
}

/// t-statistic paths: raw observations are drawn once per path and the
/// statistic `T_k = mean / (sd / sqrt(n_{1:k}))` is computed cumulatively.
/// A path whose statistic is undefined at some stage (degenerate variance)
/// is regenerated from a bumped stream and recorded in `resampled`.
pub fn generate_t_paths(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
) -> Result<PathMatrix> {
    let (pm, _) = t_paths_impl(spec, hypothesis, m_paths, seed, stream, false)?;
    Ok(pm)
}

/// As [`generate_t_paths`], additionally returning each path's raw
/// observations (diagnostic; lets callers re-derive the statistics).
pub fn generate_t_paths_with_raw(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
) -> Result<(PathMatrix, Vec<Vec<f64>>)> {
    let (pm, raw) = t_paths_impl(spec, hypothesis, m_paths, seed, stream, true)?;
    Ok((pm, raw))
}

fn t_paths_impl(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
    keep_raw: bool,
) -> Result<(PathMatrix, Vec<Vec<f64>>)> {
    check_spec_and_paths(spec, m_paths)?;
    if !matches!(spec.family, TestFamily::T { .. } | TestFamily::TPilot { .. }) {
        return Err(Error::validation(format!(
            "t path generator called for family '{}'",
            spec.family.label()
        )));
    }
    let mean = spec
        .drift_of(hypothesis)
        .ok_or_else(|| Error::validation("family has no drift"))?;
    let cums = spec.stages_cum();
    let total = spec.total_n() as usize;
    let stage_ends: Vec<usize> = cums.iter().map(|&c| c as usize).collect();
    const MAX_ATTEMPTS: u32 = 8;

    let rows: Vec<Result<(Vec<f64>, u32, Vec<f64>)>> = (0..m_paths)
        .into_par_iter()
        .map(|m| {
            'attempt: for bump in 0..MAX_ATTEMPTS {
                let mut rng = PathRng::keyed(seed, stream, hypothesis, m as u64, bump);
                let mut row = Vec::with_capacity(stage_ends.len());
                let mut raw = Vec::with_capacity(if keep_raw { total } else { 0 });
                // Welford running mean and sum of squared deviations.
                let (mut count, mut avg, mut m2) = (0usize, 0.0f64, 0.0f64);
                let mut next_stage = 0;
                for _ in 0..total {
                    let x = mean + rng.standard_normal();
                    if keep_raw {
                        raw.push(x);
                    }
                    count += 1;
                    let d1 = x - avg;
                    avg += d1 / count as f64;
                    m2 += d1 * (x - avg);
                    if next_stage < stage_ends.len() && count == stage_ends[next_stage] {
                        let n = count as f64;
                        let sd = (m2 / (n - 1.0)).sqrt();
                        let t = avg * n.sqrt() / sd;
                        if !t.is_finite() {
                            continue 'attempt;
                        }
                        row.push(t);
                        next_stage += 1;
                    }
                }
                return Ok((row, bump, raw));
            }
            Err(Error::Numerical(format!(
                "path {m} stayed degenerate after {MAX_ATTEMPTS} regeneration attempts"
            )))
        })
        .collect();

    let mut pairs = Vec::with_capacity(m_paths);
    let mut raws = Vec::with_capacity(if keep_raw { m_paths } else { 0 });
    for r in rows {
        let (row, bump, raw) = r?;
        pairs.push((row, bump));
        if keep_raw {
            raws.push(raw);
        }
    }
    let mut pm = PathMatrix::from_rows(hypothesis, stream, seed, cums, pairs);
    if spec.sidedness.is_two() {
        pm.apply_absolute();
    }
    Ok((pm, raws))
}

/// Paths from a user statistic: `sampler` receives the path's generator
/// and the cumulative schedule and must return one value per stage.
pub fn generate_custom_paths<F>(
    stages_cum: &[f64],
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
    absolute: bool,
    sampler: F,
) -> Result<PathMatrix>
where
    F: Fn(&mut PathRng, &[f64]) -> Vec<f64> + Sync,
{
    if stages_cum.is_empty() {
        return Err(Error::validation("schedule must have at least one stage"));
    }
    if m_paths == 0 {
        return Err(Error::validation("path count must be positive"));
    }
    let rows: Vec<Result<(Vec<f64>, u32)>> = (0..m_paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = PathRng::for_path(seed, stream, hypothesis, m as u64);
            let row = sampler(&mut rng, stages_cum);
            if row.len() != stages_cum.len() {
                return Err(Error::validation(format!(
                    "custom sampler returned {} values for {} stages",
                    row.len(),
                    stages_cum.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!(
                    "custom sampler produced a non-finite value on path {m}"
                )));
            }
            Ok((row, 0))
        })
        .collect();
    let rows: Vec<(Vec<f64>, u32)> = rows.into_iter().collect::<Result<_>>()?;
    let mut pm = PathMatrix::from_rows(hypothesis, stream, seed, stages_cum.to_vec(), rows);
    if absolute {
        pm.apply_absolute();
    }
    Ok(pm)
}

/// Dispatch on the spec's family (custom families need
/// [`generate_custom_paths`] directly).
pub fn generate_paths(
    spec: &DesignSpec,
    hypothesis: Hypothesis,
    m_paths: usize,
    seed: u64,
    stream: StreamClass,
) -> Result<PathMatrix> {
    match &spec.family {
        TestFamily::Z { .. } => generate_z_paths(spec, hypothesis, m_paths, seed, stream),
        TestFamily::T { .. } | TestFamily::TPilot { .. } => {
            generate_t_paths(spec, hypothesis, m_paths, seed, stream)
        }
        TestFamily::TwoProp { .. } => {
            generate_two_prop_paths(spec, hypothesis, m_paths, seed, stream)
        }
        TestFamily::Custom { label } => Err(Error::validation(format!(
            "family '{label}' needs the custom path generator"
        ))),
    }
}

/// Write a path matrix as CSV: `path,stage_1,...,stage_K`.
pub fn dump_paths_csv<W: Write>(pm: &PathMatrix, mut out: W) -> Result<()> {
    write!(out, "path")?;
    for k in 1..=pm.k_stages() {
        write!(out, ",stage_{k}")?;
    }
    writeln!(out)?;
    for m in 0..pm.m_paths {
        write!(out, "{m}")?;
        for v in pm.row(m) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
