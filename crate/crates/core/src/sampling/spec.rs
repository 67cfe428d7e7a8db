//! Design specification and sample-size schedules.

use crate::error::Error;
use crate::Result;
use serde::{Deserialize, Serialize};

/// Which hypothesis a path set is drawn under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    /// Null: zero drift.
    Null,
    /// Alternative: design effect size.
    Alt,
    /// Scaled alternative used by symmetric designs (drift `lambda * d_a`).
    Tilde,
}

impl Hypothesis {
    pub(crate) fn tag(&self) -> &'static [u8] {
        match self {
            Hypothesis::Null => b"H0",
            Hypothesis::Alt => b"Ha",
            Hypothesis::Tilde => b"Ht",
        }
    }
}

/// Rejection sidedness of the test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    /// Reject for large `S_k`.
    One,
    /// Reject for large `|S_k|`; paths carry the absolute statistic.
    Two,
}

impl Sidedness {
    pub fn is_two(&self) -> bool {
        matches!(self, Sidedness::Two)
    }
}

/// Statistic family of the sequential test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFamily {
    /// One-sample z test with known standard deviation.
    Z { mu_alt: f64, sigma: f64 },
    /// One-sample t test with standardized effect `delta = mu_a / sigma`.
    T { delta: f64 },
    /// t test whose effect is standardized by a pilot estimate of sigma.
    TPilot { mu_alt: f64, pilot_sigma: f64 },
    /// Two-sample difference of proportions (per-arm stage sizes).
    TwoProp { p_x: f64, p_y: f64 },
    /// Statistic supplied through the custom path generator.
    Custom { label: String },
}

impl TestFamily {
    pub fn label(&self) -> &str {
        match self {
            TestFamily::Z { .. } => "z",
            TestFamily::T { .. } => "t",
            TestFamily::TPilot { .. } => "t-pilot",
            TestFamily::TwoProp { .. } => "two-prop",
            TestFamily::Custom { label } => label,
        }
    }
}

/// Full specification of a group sequential design problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub family: TestFamily,
    pub sidedness: Sidedness,
    /// Per-stage sample sizes `n_k` (per arm for two-proportion tests).
    pub stage_sizes: Vec<u32>,
    /// Type-1 level the finished design must respect.
    pub alpha: f64,
    /// Empirical type-1 budget used during optimization; defaults to
    /// `0.9 * alpha` to buffer sample-average noise.
    #[serde(default)]
    pub alpha_buffer: Option<f64>,
    /// Type-2 bound on the optimized design; `1.0` disables it.
    pub beta: f64,
    /// Drift scaling of the tilde hypothesis used by symmetric designs.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

impl DesignSpec {
    pub fn k_stages(&self) -> usize {
        self.stage_sizes.len()
    }

    /// Cumulative sizes `n_{1:k}` as floats.
    pub fn stages_cum(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.stage_sizes
            .iter()
            .map(|&n| {
                acc += n as f64;
                acc
            })
            .collect()
    }

    pub fn total_n(&self) -> u64 {
        self.stage_sizes.iter().map(|&n| n as u64).sum()
    }

    /// Empirical type-1 budget for the sample-average problem.
    pub fn alpha_tilde(&self) -> f64 {
        self.alpha_buffer.unwrap_or(0.9 * self.alpha)
    }

    /// Per-sample standardized drift under the alternative, when the
    /// family has a closed-form Gaussian path law.
    pub fn drift_alt(&self) -> Option<f64> {
        match &self.family {
            TestFamily::Z { mu_alt, sigma } => Some(mu_alt / sigma),
            TestFamily::T { delta } => Some(*delta),
            TestFamily::TPilot { mu_alt, pilot_sigma } => Some(mu_alt / pilot_sigma),
            TestFamily::TwoProp { p_x, p_y } => {
                let v = 2.0 * p_x * (1.0 - p_x) + 2.0 * p_y * (1.0 - p_y);
                Some((p_x - p_y) / v.sqrt())
            }
            TestFamily::Custom { .. } => None,
        }
    }

    /// Drift of a hypothesis stream: 0, `d_a`, or `lambda * d_a`.
    pub fn drift_of(&self, hypothesis: Hypothesis) -> Option<f64> {
        match hypothesis {
            Hypothesis::Null => Some(0.0),
            Hypothesis::Alt => self.drift_alt(),
            Hypothesis::Tilde => self.drift_alt().map(|d| self.lambda * d),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.stage_sizes.is_empty() {
            return Err(Error::validation("design needs at least one stage"));
        }
        if self.stage_sizes.iter().any(|&n| n == 0) {
            return Err(Error::validation("stage sizes must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::validation(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if let Some(b) = self.alpha_buffer {
            if !(b >= 0.0 && b <= self.alpha) {
                return Err(Error::validation(format!(
                    "alpha buffer {b} must be in [0, alpha = {}]",
                    self.alpha
                )));
            }
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::validation(format!(
                "beta must be in (0,1], got {}",
                self.beta
            )));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::validation(format!(
                "lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        match &self.family {
            TestFamily::Z { mu_alt, sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::validation(format!("sigma must be positive, got {sigma}")));
                }
                if !mu_alt.is_finite() {
                    return Err(Error::validation("mu_alt must be finite"));
                }
            }
            TestFamily::T { delta } => {
                if !delta.is_finite() {
                    return Err(Error::validation("delta must be finite"));
                }
                if self.stage_sizes[0] < 2 {
                    return Err(Error::validation(
                        "t designs need n_1 >= 2 so the first-stage variance estimate exists",
                    ));
                }
            }
            TestFamily::TPilot { mu_alt, pilot_sigma } => {
                if !(*pilot_sigma > 0.0) {
                    return Err(Error::validation(format!(
                        "pilot sigma must be positive, got {pilot_sigma}"
                    )));
                }
                if !mu_alt.is_finite() {
                    return Err(Error::validation("mu_alt must be finite"));
                }
                if self.stage_sizes[0] < 2 {
                    return Err(Error::validation(
                        "t designs need n_1 >= 2 so the first-stage variance estimate exists",
                    ));
                }
            }
            TestFamily::TwoProp { p_x, p_y } => {
                for (name, p) in [("p_x", p_x), ("p_y", p_y)] {
                    if !(*p > 0.0 && *p < 1.0) {
                        return Err(Error::validation(format!(
                            "{name} must be in (0,1), got {p}"
                        )));
                    }
                }
            }
            TestFamily::Custom { .. } => {}
        }
        Ok(())
    }
}

/// Split a total sample size into `k` near-equal stages, larger stages
/// first: `make_schedule(100, 3) = [34, 33, 33]`.
pub fn make_schedule(total_n: u32, k: usize) -> Result<Vec<u32>> {
    if k == 0 {
        return Err(Error::validation("schedule needs at least one stage"));
    }
    if (total_n as usize) < k {
        return Err(Error::validation(format!(
            "cannot split {total_n} samples into {k} stages"
        )));
    }
    let base = total_n / k as u32;
    let rem = (total_n % k as u32) as usize;
    Ok((0..k)
        .map(|i| if i < rem { base + 1 } else { base })
        .collect())
}

/// Observations collected before the trial, used to standardize the effect
/// of a t design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotSample {
    pub values: Vec<f64>,
}

/// Sample standard deviation of the pilot (n-1 divisor).
pub fn estimate_pilot_sigma(pilot: &PilotSample) -> Result<f64> {
    let n = pilot.values.len();
    if n < 2 {
        return Err(Error::validation(format!(
            "pilot needs at least 2 observations, got {n}"
        )));
    }
    let mean = pilot.values.iter().sum::<f64>() / n as f64;
    let ss: f64 = pilot.values.iter().map(|x| (x - mean) * (x - mean)).sum();
    let var = ss / (n - 1) as f64;
    if !(var > 0.0) {
        return Err(Error::validation(
            "pilot sample has zero variance; sigma cannot be estimated",
        ));
    }
    Ok(var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_spec() -> DesignSpec {
        DesignSpec {
            family: TestFamily::Z {
                mu_alt: 0.5,
                sigma: 1.0,
            },
            sidedness: Sidedness::One,
            stage_sizes: vec![34, 33, 33],
            alpha: 0.05,
            alpha_buffer: None,
            beta: 0.95,
            lambda: 1.0,
        }
    }

    #[test]
    fn schedule_puts_remainder_up_front() {
        assert_eq!(make_schedule(100, 3).unwrap(), vec![34, 33, 33]);
        assert_eq!(make_schedule(100, 4).unwrap(), vec![25, 25, 25, 25]);
        assert_eq!(make_schedule(100, 7).unwrap(), vec![15, 15, 14, 14, 14, 14, 14]);
        assert_eq!(make_schedule(7, 3).unwrap(), vec![3, 2, 2]);
        assert!(make_schedule(2, 3).is_err());
        assert!(make_schedule(10, 0).is_err());
    }

    #[test]
    fn cumulative_sizes_and_defaults() {
        let spec = z_spec();
        assert_eq!(spec.stages_cum(), vec![34.0, 67.0, 100.0]);
        assert_eq!(spec.total_n(), 100);
        assert!((spec.alpha_tilde() - 0.045).abs() < 1e-15);
        assert_eq!(spec.drift_alt(), Some(0.5));
        assert_eq!(spec.drift_of(Hypothesis::Null), Some(0.0));
        assert_eq!(spec.drift_of(Hypothesis::Tilde), Some(0.5));
    }

    #[test]
    fn two_prop_drift_matches_hand_value() {
        let spec = DesignSpec {
            family: TestFamily::TwoProp { p_x: 0.31, p_y: 0.27 },
            sidedness: Sidedness::Two,
            stage_sizes: vec![200; 8],
            alpha: 0.05,
            alpha_buffer: None,
            beta: 1.0,
            lambda: 1.0,
        };
        // (0.31 - 0.27) / sqrt(2*0.31*0.69 + 2*0.27*0.73)
        let want = 0.04 / (2.0 * 0.31 * 0.69 + 2.0 * 0.27 * 0.73_f64).sqrt();
        assert!((spec.drift_alt().unwrap() - want).abs() < 1e-15);
        spec.validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_specs() {
        let mut s = z_spec();
        s.alpha = 1.5;
        assert!(s.validate().is_err());
        let mut s = z_spec();
        s.stage_sizes = vec![];
        assert!(s.validate().is_err());
        let mut s = z_spec();
        s.alpha_buffer = Some(0.2);
        assert!(s.validate().is_err());
        let mut s = z_spec();
        s.family = TestFamily::T { delta: 0.5 };
        s.stage_sizes = vec![1, 50];
        assert!(s.validate().is_err());
        let mut s = z_spec();
        s.family = TestFamily::Z {
            mu_alt: 0.5,
            sigma: 0.0,
        };
        assert!(s.validate().is_err());
    }

    #[test]
    fn pilot_sigma_matches_hand_computation() {
        let pilot = PilotSample {
            values: vec![1.0, 2.0, 3.0, 4.0],
        };
        let got = estimate_pilot_sigma(&pilot).unwrap();
        assert!((got - 1.290_994_448_735_805_6).abs() < 1e-15);
        assert!(estimate_pilot_sigma(&PilotSample { values: vec![1.0] }).is_err());
        assert!(estimate_pilot_sigma(&PilotSample {
            values: vec![2.0, 2.0, 2.0]
        })
        .is_err());
    }
}
