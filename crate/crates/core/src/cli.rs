//! Command-line front end: configuration, pipelines, and file outputs.
//!
//! One flat TOML file configures a run; command-line flags override the
//! file. Every command writes machine-readable artifacts into the output
//! directory plus `resolved_config.toml` (the effective configuration,
//! which re-parses to the same `RunConfig`) and `run_meta.json` (wall
//! times — the only place timing lives, so every other artifact is
//! byte-identical across reruns of the same configuration).
//!
//! Exit codes: 0 success, 2 bad configuration or input, 3 infeasible
//! design problem, 4 solver stopped at its work budget. Nonzero exits
//! print a single-line error JSON to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::evaluate::{
    compare_designs, convergence_csv, convergence_study, exact_rates, mc_rates, ExactRates,
    LabeledDesign, McRates, DEFAULT_M_EVAL,
};
use crate::gaussnum::{boundaries_from_spending, RecursionGrid, SpendingKind};
use crate::milp::{export_lp_text, MilpStatus};
use crate::replay::{
    load_trial_csv, permutation_study, replay_fixed, synthetic_two_arm, PermutationSummary,
    ReplayResult, TrialData,
};
use crate::sampling::{
    estimate_pilot_sigma, generate_paths, make_schedule, DesignSpec, Hypothesis, PilotSample,
    Sidedness, StreamClass, TestFamily,
};
use crate::smilp::{
    build_standard_milp, build_symmetric_milp, solve_design, solve_symmetric_design,
    BuildOptions, CutoffVector, DesignOutcome, SaaProblem, SolverParams,
};
use crate::Result;

/// Approximate deterministic solver ticks per wall-clock second on a
/// current desktop core. `time_limit_secs` converts through this constant
/// so a "time limit" is really a reproducible work budget: the same
/// configuration performs the same search on any machine.
pub const TICKS_PER_SECOND: u64 = 30_000_000;

// ---------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------

/// Trial definition: family, schedule, and error budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    /// Statistic family: `z`, `t`, `t-pilot`, or `two-prop`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_alt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_y: Option<f64>,
    /// CSV with a `value` column; its sample standard deviation
    /// standardizes a `t-pilot` effect.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_sigma: Option<f64>,
    #[serde(default = "default_sidedness")]
    pub sidedness: Sidedness,
    /// Explicit per-stage sizes, or `total_n` split into `stages`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage_sizes: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    pub alpha: f64,
    /// Training-sample type-1 budget; defaults to `0.9 * alpha`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_tilde: Option<f64>,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Solve the two-boundary (accept and reject) design.
    #[serde(default)]
    pub symmetric: bool,
}

fn default_sidedness() -> Sidedness {
    Sidedness::One
}
fn default_beta() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    1.0
}

/// Run-wide knobs shared by every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Training paths per hypothesis.
    pub m_paths: usize,
    /// Single seed from which every stream in the run is keyed.
    pub seed: u64,
    /// Fresh evaluation paths per hypothesis.
    pub m_eval: usize,
    pub out_dir: PathBuf,
    /// Worker threads (0 keeps the library default).
    pub threads: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            m_paths: 1000,
            seed: 1,
            m_eval: DEFAULT_M_EVAL,
            out_dir: PathBuf::from("out"),
            threads: 0,
        }
    }
}

/// Optimizer knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub rel_gap: f64,
    pub abs_gap: f64,
    /// Deterministic work budget; omit for unlimited.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tick_limit: Option<u64>,
    /// Approximate time budget, converted by [`TICKS_PER_SECOND`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_limit: Option<u64>,
    pub presolve: bool,
    pub warm_start: bool,
    pub rounding: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_hi: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            rel_gap: 1e-6,
            abs_gap: 1e-9,
            tick_limit: None,
            time_limit_secs: None,
            node_limit: None,
            presolve: true,
            warm_start: true,
            rounding: true,
            theta_lo: None,
            theta_hi: None,
        }
    }
}

/// Spending-family choice for `boundaries` (and replay cutoffs when the
/// replay section gives no explicit thresholds).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoundariesSection {
    pub kind: SpendingKind,
}

impl Default for BoundariesSection {
    fn default() -> Self {
        BoundariesSection {
            kind: SpendingKind::OBrienFleming,
        }
    }
}

/// Which designs enter the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {
    /// Any of `smilp`, `pocock`, `obf`, `lan-demets`.
    pub designs: Vec<String>,
    /// Labels improvements are measured against; defaults to every
    /// spending design in `designs`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub benchmarks: Option<Vec<String>>,
}

impl Default for CompareSection {
    fn default() -> Self {
        CompareSection {
            designs: vec![
                "smilp".into(),
                "pocock".into(),
                "obf".into(),
                "lan-demets".into(),
            ],
            benchmarks: None,
        }
    }
}

/// Replay inputs: recorded arms or a synthetic stand-in, plus cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ReplaySection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment_csv: Option<PathBuf>,
    /// Generate Bernoulli arms instead of reading files.
    pub synthetic: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_control: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_treatment: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_control: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_treatment: Option<usize>,
    /// Explicit stage cutoffs; defaults to the configured spending
    /// boundaries when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Vec<f64>>,
    /// Per-arm stage sizes; defaults to half of each trial stage size
    /// (equal allocation of the stage's total enrollment).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<u32>>,
    pub n_perm: usize,
}

/// Path counts and seeds of the convergence study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceSection {
    pub m_list: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl Default for ConvergenceSection {
    fn default() -> Self {
        ConvergenceSection {
            m_list: vec![250, 1000, 4000],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

/// Full configuration of one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub trial: TrialConfig,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub boundaries: BoundariesSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub replay: ReplaySection,
    #[serde(default)]
    pub convergence: ConvergenceSection,
}

impl RunConfig {
    /// Parse a TOML string (parse errors carry line and column).
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if config.replay.n_perm == 0 {
            config.replay.n_perm = 2000;
        }
        Ok(config)
    }

    /// Read a config file, resolving relative paths against its directory
    /// and checking that referenced input files exist.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for file in [
            &mut config.trial.pilot_file,
            &mut config.replay.control_csv,
            &mut config.replay.treatment_csv,
        ]
        .into_iter()
        .flatten()
        {
            if file.is_relative() {
                *file = base.join(&file);
            }
            if !file.exists() {
                return Err(Error::Config(format!(
                    "referenced file does not exist: {}",
                    file.display()
                )));
            }
        }
        if config.run.out_dir.is_relative() {
            config.run.out_dir = base.join(&config.run.out_dir);
        }
        Ok(config)
    }

    /// Serialize the effective configuration.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn require(&self, field: &str, value: Option<f64>) -> Result<f64> {
        value.ok_or_else(|| {
            Error::Config(format!(
                "trial kind '{}' needs trial.{field}",
                self.trial.kind
            ))
        })
    }

    /// Build the trial design the configuration describes.
    pub fn design_spec(&self) -> Result<DesignSpec> {
        let t = &self.trial;
        let family = match t.kind.as_str() {
            "z" => TestFamily::Z {
                mu_alt: self.require("mu_alt", t.mu_alt)?,
                sigma: self.require("sigma", t.sigma)?,
            },
            "t" => TestFamily::T {
                delta: self.require("delta", t.delta)?,
            },
            "t-pilot" | "t_pilot" => {
                let pilot_sigma = match (t.pilot_sigma, &t.pilot_file) {
                    (Some(s), _) => s,
                    (None, Some(path)) => estimate_pilot_sigma(&load_pilot_csv(path)?)?,
                    (None, None) => {
                        return Err(Error::Config(
                            "t-pilot trials need trial.pilot_sigma or trial.pilot_file"
                                .into(),
                        ))
                    }
                };
                TestFamily::TPilot {
                    mu_alt: self.require("mu_alt", t.mu_alt)?,
                    pilot_sigma,
                }
            }
            "two-prop" | "two_prop" => TestFamily::TwoProp {
                p_x: self.require("p_x", t.p_x)?,
                p_y: self.require("p_y", t.p_y)?,
            },
            other => {
                return Err(Error::Config(format!(
                    "unknown trial kind '{other}' (expected z, t, t-pilot, or two-prop)"
                )))
            }
        };
        let stage_sizes = match (&t.stage_sizes, t.total_n, t.stages) {
            (Some(sizes), None, None) => sizes.clone(),
            (None, Some(n), Some(k)) => make_schedule(n, k)?,
            (None, None, None) => {
                return Err(Error::Config(
                    "give trial.stage_sizes, or trial.total_n with trial.stages".into(),
                ))
            }
            _ => {
                return Err(Error::Config(
                    "give either trial.stage_sizes or trial.total_n with trial.stages, \
                     not both"
                        .into(),
                ))
            }
        };
        let spec = DesignSpec {
            family,
            sidedness: t.sidedness,
            stage_sizes,
            alpha: t.alpha,
            alpha_buffer: t.alpha_tilde,
            beta: t.beta,
            lambda: t.lambda,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Solver knobs with the time budget folded into ticks.
    pub fn solver_params(&self) -> Result<SolverParams> {
        let s = &self.solver;
        let mut ticks = s.tick_limit.unwrap_or(u64::MAX);
        if let Some(secs) = s.time_limit_secs {
            if !(secs > 0.0) {
                return Err(Error::Config(format!(
                    "solver.time_limit_secs must be positive, got {secs}"
                )));
            }
            let from_time = (secs * TICKS_PER_SECOND as f64).min(u64::MAX as f64) as u64;
            ticks = ticks.min(from_time.max(1));
        }
        let theta_box = match (s.theta_lo, s.theta_hi) {
            (Some(lo), Some(hi)) => Some((lo, hi)),
            (None, None) => None,
            _ => {
                return Err(Error::Config(
                    "give both solver.theta_lo and solver.theta_hi or neither".into(),
                ))
            }
        };
        Ok(SolverParams {
            theta_box,
            presolve: s.presolve,
            warm_start: s.warm_start,
            rounding: s.rounding,
            rel_gap: s.rel_gap,
            abs_gap: s.abs_gap,
            tick_limit: ticks,
            node_limit: s.node_limit.unwrap_or(u64::MAX),
        })
    }
}

/// Read a pilot sample from a CSV with a `value` column.
pub fn load_pilot_csv(path: &Path) -> Result<PilotSample> {
    let show = path.display();
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::parse(format!("{show}: {e}")))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(format!("{show}: {e}")))?;
    let col = headers
        .iter()
        .position(|h| h.trim() == "value")
        .ok_or_else(|| Error::parse(format!("{show}: no 'value' column")))?;
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(format!("{show}: {e}")))?;
        let line = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".into());
        let field = record
            .get(col)
            .ok_or_else(|| Error::parse(format!("{show} line {line}: missing value field")))?;
        let v: f64 = field.trim().parse().map_err(|_| {
            Error::parse(format!("{show} line {line}: '{field}' is not a number"))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(Error::parse(format!("{show}: file has no value rows")));
    }
    Ok(PilotSample { values })
}

// ---------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------

fn status_label(status: MilpStatus) -> &'static str {
    match status {
        MilpStatus::Optimal => "optimal",
        MilpStatus::Infeasible => "infeasible",
        MilpStatus::TimeLimitIncumbent => "work-budget-incumbent",
        MilpStatus::Unbounded => "unbounded",
    }
}

/// Solved design plus its audit trail and evaluation, as written to
/// `design.json`. Contains no wall-clock times, so reruns of the same
/// configuration produce byte-identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignArtifact {
    pub label: String,
    pub spec: DesignSpec,
    pub m_paths: usize,
    pub seed: u64,
    pub status: String,
    pub objective: Option<f64>,
    pub lower_bound: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub node_count: u64,
    pub lp_iterations: u64,
    pub ticks_used: u64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub widened: bool,
    pub presolved: bool,
    pub warm_started: bool,
    pub cutoffs: CutoffVector,
    pub clamped_stages: Vec<usize>,
    pub accept_null: Option<f64>,
    pub accept_alt: Option<f64>,
    pub objective_empirical: Option<f64>,
    pub in_sample_ok: Option<bool>,
    pub exact: Option<ExactRates>,
    pub mc: McRates,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundariesArtifact {
    pub kind: String,
    pub alpha: f64,
    pub two_sided: bool,
    pub stages_cum: Vec<f64>,
    pub theta: Vec<f64>,
    pub spend_increments: Vec<f64>,
    pub cumulative_spend: Vec<f64>,
    /// Stages whose requested increment was below integration resolution.
    pub clipped: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayArtifact {
    pub thresholds: Vec<f64>,
    pub schedule: Vec<u32>,
    pub two_sided: bool,
    pub fixed: ReplayResult,
    pub n_perm: usize,
    pub seed: u64,
    pub permutation: PermutationSummary,
}

// ---------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------

fn write_out(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = out_dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| Error::validation(format!("serializing artifact: {e}")))
        .map(|mut s| {
            s.push('\n');
            s
        })
}

/// Turn a solve outcome into cutoffs plus the exit code it implies
/// (0 proven, 4 stopped at the work budget with an incumbent).
fn solved_cutoffs(outcome: &DesignOutcome) -> Result<(CutoffVector, i32)> {
    match (&outcome.cutoffs, outcome.solution.status) {
        (Some(c), MilpStatus::Optimal) => Ok((c.clone(), 0)),
        (Some(c), MilpStatus::TimeLimitIncumbent) => Ok((c.clone(), 4)),
        (_, MilpStatus::Infeasible) => Err(Error::Infeasible(
            "no cutoffs satisfy the error budgets on these training paths".into(),
        )),
        (None, _) => Err(Error::numerical(
            "solver stopped before finding any design; raise solver.tick_limit or \
             solver.time_limit_secs",
        )),
        (Some(_), status) => Err(Error::numerical(format!(
            "unexpected solver status {status:?} with an incumbent"
        ))),
    }
}

fn spending_thresholds(
    spec: &DesignSpec,
    kind: SpendingKind,
    grid: &RecursionGrid,
) -> Result<crate::gaussnum::BoundaryResult> {
    let bracket = if spec.sidedness.is_two() {
        (0.0, 10.0)
    } else {
        (-10.0, 10.0)
    };
    boundaries_from_spending(
        &spec.stages_cum(),
        kind,
        spec.alpha,
        spec.sidedness.is_two(),
        bracket,
        grid,
    )
}

fn design_artifact(
    config: &RunConfig,
    spec: &DesignSpec,
    outcome: &DesignOutcome,
    cutoffs: &CutoffVector,
    grid: &RecursionGrid,
) -> Result<DesignArtifact> {
    let exact = if matches!(spec.family, TestFamily::Z { .. } | TestFamily::TwoProp { .. }) {
        Some(exact_rates(spec, cutoffs, grid)?)
    } else {
        None
    };
    let mc = mc_rates(spec, cutoffs, config.run.m_eval, config.run.seed)?;
    let s = &outcome.solution;
    Ok(DesignArtifact {
        label: "smilp".into(),
        spec: spec.clone(),
        m_paths: config.run.m_paths,
        seed: config.run.seed,
        status: status_label(s.status).into(),
        objective: s.value,
        lower_bound: s.lower_bound,
        abs_gap: s.abs_gap,
        rel_gap: s.rel_gap,
        node_count: s.node_count,
        lp_iterations: s.lp_iterations,
        ticks_used: s.ticks_used,
        theta_lo: outcome.theta_lo,
        theta_hi: outcome.theta_hi,
        widened: outcome.widened,
        presolved: outcome.presolved,
        warm_started: outcome.warm_started,
        cutoffs: cutoffs.clone(),
        clamped_stages: outcome.clamped_stages.clone(),
        accept_null: outcome.accept_null,
        accept_alt: outcome.accept_alt,
        objective_empirical: outcome.objective_empirical,
        in_sample_ok: outcome.in_sample_ok,
        exact,
        mc,
    })
}

fn run_solver(config: &RunConfig, spec: &DesignSpec) -> Result<DesignOutcome> {
    let params = config.solver_params()?;
    if config.trial.symmetric {
        solve_symmetric_design(spec, config.run.m_paths, config.run.seed, &params)
    } else {
        solve_design(spec, config.run.m_paths, config.run.seed, &params)
    }
}

/// Solve the design problem, evaluate the result, and write
/// `design.json`, `report.csv`, and `budget.csv`.
pub fn cmd_design(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.design_spec()?;
    let grid = RecursionGrid::default();
    let outcome = run_solver(config, &spec)?;
    let (cutoffs, code) = solved_cutoffs(&outcome)?;
    let artifact = design_artifact(config, &spec, &outcome, &cutoffs, &grid)?;
    write_out(out_dir, "design.json", &to_json(&artifact)?)?;

    let table = compare_designs(
        &spec,
        &[LabeledDesign {
            label: artifact.label.clone(),
            cutoffs,
            benchmark: false,
        }],
        config.run.m_eval,
        config.run.seed,
        &grid,
    )?;
    write_out(out_dir, "report.csv", &table.summary_csv())?;
    write_out(out_dir, "budget.csv", &table.budget_csv())?;
    Ok(code)
}

/// Compute spending boundaries for the configured kind and write
/// `cutoffs.json`.
pub fn cmd_boundaries(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.design_spec()?;
    let grid = RecursionGrid::default();
    let kind = config.boundaries.kind;
    let res = spending_thresholds(&spec, kind, &grid)?;
    let mut cumulative = Vec::with_capacity(res.spend.len());
    let mut acc = 0.0;
    for &s in &res.spend {
        acc += s;
        cumulative.push(acc);
    }
    let artifact = BoundariesArtifact {
        kind: kind.label().into(),
        alpha: spec.alpha,
        two_sided: spec.sidedness.is_two(),
        stages_cum: spec.stages_cum(),
        theta: res.theta,
        spend_increments: res.spend,
        cumulative_spend: cumulative,
        clipped: res.clipped,
    };
    write_out(out_dir, "cutoffs.json", &to_json(&artifact)?)?;
    Ok(0)
}

/// Evaluate the configured designs side by side and write `compare.csv`,
/// `budget.csv`, and `compare.json`.
pub fn cmd_compare(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.design_spec()?;
    if config.trial.symmetric {
        return Err(Error::validation(
            "two-boundary designs cannot be tabled against single-boundary \
             spending benchmarks",
        ));
    }
    let grid = RecursionGrid::default();
    if config.compare.designs.is_empty() {
        return Err(Error::Config("compare.designs must not be empty".into()));
    }
    let benchmark_labels: Vec<String> = match &config.compare.benchmarks {
        Some(list) => list.clone(),
        None => config
            .compare
            .designs
            .iter()
            .filter(|d| d.as_str() != "smilp")
            .cloned()
            .collect(),
    };
    for b in &benchmark_labels {
        if !config.compare.designs.contains(b) {
            return Err(Error::Config(format!(
                "benchmark '{b}' is not in compare.designs"
            )));
        }
    }

    let mut code = 0;
    let mut designs = Vec::new();
    for label in &config.compare.designs {
        let cutoffs = if label == "smilp" {
            let outcome = run_solver(config, &spec)?;
            let (cutoffs, c) = solved_cutoffs(&outcome)?;
            code = code.max(c);
            cutoffs
        } else {
            let kind: SpendingKind = label.parse()?;
            CutoffVector::standard(spending_thresholds(&spec, kind, &grid)?.theta)?
        };
        designs.push(LabeledDesign {
            label: label.clone(),
            cutoffs,
            benchmark: benchmark_labels.contains(label),
        });
    }
    let table = compare_designs(&spec, &designs, config.run.m_eval, config.run.seed, &grid)?;
    write_out(out_dir, "compare.csv", &table.summary_csv())?;
    write_out(out_dir, "budget.csv", &table.budget_csv())?;
    write_out(out_dir, "compare.json", &table.to_json()?)?;
    Ok(code)
}

fn replay_data(config: &RunConfig) -> Result<TrialData> {
    let r = &config.replay;
    if r.synthetic {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| Error::Config(format!("replay.synthetic needs replay.{name}")))
        };
        let count = |name: &str, v: Option<usize>| {
            v.ok_or_else(|| Error::Config(format!("replay.synthetic needs replay.{name}")))
        };
        synthetic_two_arm(
            need("p_control", r.p_control)?,
            need("p_treatment", r.p_treatment)?,
            count("n_control", r.n_control)?,
            count("n_treatment", r.n_treatment)?,
            config.run.seed,
        )
    } else {
        match (&r.control_csv, &r.treatment_csv) {
            (Some(c), Some(t)) => load_trial_csv(c, t),
            _ => Err(Error::Config(
                "replay needs replay.control_csv and replay.treatment_csv \
                 (or replay.synthetic = true)"
                    .into(),
            )),
        }
    }
}

/// Replay the configured cutoffs over trial data in fixed order and under
/// permutations; writes `replay.json` and `permutation.csv`.
pub fn cmd_replay(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.design_spec()?;
    let grid = RecursionGrid::default();
    let data = replay_data(config)?;
    let thresholds = match &config.replay.thresholds {
        Some(t) => t.clone(),
        None => spending_thresholds(&spec, config.boundaries.kind, &grid)?.theta,
    };
    let schedule = match &config.replay.schedule {
        Some(s) => s.clone(),
        None => {
            let mut halves = Vec::with_capacity(spec.stage_sizes.len());
            for (k, &n) in spec.stage_sizes.iter().enumerate() {
                if n % 2 != 0 {
                    return Err(Error::Config(format!(
                        "stage {} enrolls {n} patients, which cannot split equally \
                         across two arms; give replay.schedule explicitly",
                        k + 1
                    )));
                }
                halves.push(n / 2);
            }
            halves
        }
    };
    let fixed = replay_fixed(&data, &thresholds, &schedule, spec.sidedness)?;
    let permutation = permutation_study(
        &data,
        &thresholds,
        &schedule,
        spec.sidedness,
        config.replay.n_perm,
        config.run.seed,
    )?;
    let artifact = ReplayArtifact {
        thresholds,
        schedule,
        two_sided: spec.sidedness.is_two(),
        fixed,
        n_perm: config.replay.n_perm,
        seed: config.run.seed,
        permutation: permutation.clone(),
    };
    write_out(out_dir, "replay.json", &to_json(&artifact)?)?;
    write_out(out_dir, "permutation.csv", &permutation.to_csv())?;
    Ok(0)
}

/// Compile the design problem and write the model as LP text.
pub fn cmd_export_milp(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.design_spec()?;
    let m = config.run.m_paths;
    let seed = config.run.seed;
    let null = generate_paths(&spec, Hypothesis::Null, m, seed, StreamClass::Train)?;
    let alt = generate_paths(&spec, Hypothesis::Alt, m, seed, StreamClass::Train)?;
    let tilde = if config.trial.symmetric {
        Some(generate_paths(&spec, Hypothesis::Tilde, m, seed, StreamClass::Train)?)
    } else {
        None
    };
    let problem = SaaProblem::new(spec, null, alt, tilde)?;
    let opts = BuildOptions {
        theta_box: config.solver_params()?.theta_box,
        presolve: config.solver.presolve,
    };
    let milp = if problem.is_symmetric() {
        build_symmetric_milp(&problem, &opts)?
    } else {
        build_standard_milp(&problem, &opts)?
    };
    write_out(out_dir, "model.lp", &export_lp_text(&milp.model)?)?;
    Ok(0)
}

/// Run the convergence study and write `convergence.csv` and
/// `convergence.json`.
pub fn cmd_convergence(config: &RunConfig, out_dir: &Path) -> Result<i32> {
    let spec = config.design_spec()?;
    let params = config.solver_params()?;
    let study = convergence_study(
        &spec,
        config.trial.symmetric,
        &config.convergence.m_list,
        &config.convergence.seeds,
        &params,
        &RecursionGrid::default(),
    )?;
    write_out(out_dir, "convergence.csv", &convergence_csv(&study))?;
    write_out(out_dir, "convergence.json", &to_json(&study)?)?;
    Ok(0)
}

// ---------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------

/// Command-line arguments. Flags override the config file.
#[derive(Debug, Parser)]
#[command(
    name = "seqdesign",
    version,
    about = "Design, evaluate, and replay group sequential hypothesis tests"
)]
pub struct CliArgs {
    #[command(subcommand)]
    pub command: CommandKind,
    /// Configuration file.
    #[arg(long, global = true, default_value = "seqdesign.toml")]
    pub config: PathBuf,
    /// Output directory (overrides run.out_dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed override (overrides run.seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (overrides run.threads).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum CommandKind {
    /// Solve the optimal design problem and evaluate the result.
    Design,
    /// Compute alpha-spending boundaries.
    Boundaries,
    /// Evaluate designs side by side.
    Compare,
    /// Replay cutoffs over recorded or synthetic trial data.
    Replay,
    /// Export the compiled optimization model as LP text.
    ExportMilp,
    /// Study how designs tighten as training paths grow.
    Convergence,
}

impl CommandKind {
    fn label(&self) -> &'static str {
        match self {
            CommandKind::Design => "design",
            CommandKind::Boundaries => "boundaries",
            CommandKind::Compare => "compare",
            CommandKind::Replay => "replay",
            CommandKind::ExportMilp => "export-milp",
            CommandKind::Convergence => "convergence",
        }
    }
}

/// Apply flag overrides to a loaded config.
pub fn apply_overrides(config: &mut RunConfig, args: &CliArgs) {
    if let Some(out) = &args.out {
        config.run.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.run.seed = seed;
    }
    if let Some(threads) = args.threads {
        config.run.threads = threads;
    }
}

/// Dispatch one command against a resolved config, writing into `out_dir`.
pub fn dispatch(command: CommandKind, config: &RunConfig, out_dir: &Path) -> Result<i32> {
    match command {
        CommandKind::Design => cmd_design(config, out_dir),
        CommandKind::Boundaries => cmd_boundaries(config, out_dir),
        CommandKind::Compare => cmd_compare(config, out_dir),
        CommandKind::Replay => cmd_replay(config, out_dir),
        CommandKind::ExportMilp => cmd_export_milp(config, out_dir),
        CommandKind::Convergence => cmd_convergence(config, out_dir),
    }
}

/// Exit code and machine-readable kind for an error.
pub fn classify(error: &Error) -> (i32, &'static str) {
    match error {
        Error::Infeasible(_) => (3, "infeasible"),
        Error::Validation(_) | Error::Config(_) | Error::Parse(_) | Error::Io(_) => {
            (2, "config")
        }
        Error::Numerical(_) => (2, "numerical"),
    }
}

fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

#[derive(Serialize)]
struct RunMeta<'a> {
    command: &'a str,
    wall_secs: f64,
    finished_unix_secs: u64,
    version: &'a str,
}

fn run(args: &CliArgs) -> Result<i32> {
    let mut config = RunConfig::load(&args.config)?;
    apply_overrides(&mut config, args);
    if config.run.threads > 0 {
        // Ignore the error: the global pool can only be sized once.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(config.run.threads)
            .build_global();
    }
    let out_dir = config.run.out_dir.clone();
    fs::create_dir_all(&out_dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    write_out(&out_dir, "resolved_config.toml", &config.to_toml()?)?;

    let started = Instant::now();
    let code = dispatch(args.command, &config, &out_dir)?;

    // Timing lives here and only here; every other artifact is
    // byte-identical across reruns of one configuration.
    let meta = RunMeta {
        command: args.command.label(),
        wall_secs: started.elapsed().as_secs_f64(),
        finished_unix_secs: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        version: env!("CARGO_PKG_VERSION"),
    };
    write_out(&out_dir, "run_meta.json", &to_json(&meta)?)?;
    if code == 4 {
        eprintln!(
            "{}",
            error_json(
                "time-limit",
                "solver stopped at its work budget; incumbent design written"
            )
        );
    }
    Ok(code)
}

/// Parse arguments, run the command, and translate errors to exit codes.
pub fn main_entry() -> i32 {
    let args = CliArgs::parse();
    match run(&args) {
        Ok(code) => code,
        Err(e) => {
            let (code, kind) = classify(&e);
            eprintln!("{}", error_json(kind, &e.to_string()));
            code
        }
    }
}
