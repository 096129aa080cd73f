//! Models of a fluctuating RF delay and their quadrature rules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::QuadratureRule;

/// Default midpoint points for a delay uniform over one RF period.
pub const DEFAULT_UNIFORM_POINTS: usize = 128;
/// Default Gauss–Hermite nodes for a Gaussian delay.
pub const DEFAULT_GAUSSIAN_POINTS: usize = 64;

/// Distribution `f(τ)` of the relative RF delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayDistribution {
    Fixed {
        value_s: f64,
    },
    /// Uniform over one RF period starting at `start_s`.
    UniformOverPeriod {
        #[serde(default)]
        start_s: f64,
    },
    Gaussian {
        mean_s: f64,
        sigma_s: f64,
    },
    Empirical {
        samples_s: Vec<f64>,
    },
}

impl DelayDistribution {
    /// Builds a distribution from a kind name and its numeric parameters.
    pub fn from_kind(kind: &str, params: &[f64]) -> Result<Self> {
        let need = |n: usize| {
            if params.len() < n {
                Err(Error::InvalidArgument(format!(
                    "{kind} delay needs {n} parameter(s), got {}",
                    params.len()
                )))
            } else {
                Ok(())
            }
        };
        let dist = match kind {
            "fixed" | "none" => Self::Fixed {
                value_s: params.first().copied().unwrap_or(0.0),
            },
            "uniform" | "uniform_over_period" => Self::UniformOverPeriod {
                start_s: params.first().copied().unwrap_or(0.0),
            },
            "gaussian" => {
                need(2)?;
                Self::Gaussian {
                    mean_s: params[0],
                    sigma_s: params[1],
                }
            }
            "empirical" => Self::Empirical {
                samples_s: params.to_vec(),
            },
            other => return Err(Error::UnsupportedDistribution(other.to_string())),
        };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidArgument(format!("{what} must be finite")))
            }
        };
        match self {
            Self::Fixed { value_s } => finite(*value_s, "delay"),
            Self::UniformOverPeriod { start_s } => finite(*start_s, "start"),
            Self::Gaussian { mean_s, sigma_s } => {
                finite(*mean_s, "mean")?;
                finite(*sigma_s, "sigma")?;
                if *sigma_s < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "sigma must be nonnegative, got {sigma_s}"
                    )));
                }
                Ok(())
            }
            Self::Empirical { samples_s } => {
                if samples_s.is_empty() {
                    return Err(Error::InvalidArgument(
                        "empirical delay needs samples".into(),
                    ));
                }
                samples_s.iter().try_for_each(|&s| finite(s, "sample"))
            }
        }
    }

    /// Nodes and normalized weights approximating `∫ dτ f(τ) g(τ)`.
    ///
    /// `points` is the midpoint count for the uniform law and the
    /// Gauss–Hermite order for the Gaussian; it is ignored otherwise.
    pub fn quadrature(&self, period_s: f64, points: usize) -> Result<QuadratureRule> {
        self.validate()?;
        if points == 0 {
            return Err(Error::InvalidArgument(
                "quadrature needs at least one point".into(),
            ));
        }
        let rule = match self {
            Self::Fixed { value_s } => QuadratureRule {
                nodes: vec![*value_s],
                weights: vec![1.0],
            },
            Self::UniformOverPeriod { start_s } => {
                if !(period_s.is_finite() && period_s > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "period must be positive, got {period_s}"
                    )));
                }
                QuadratureRule::midpoint(*start_s, start_s + period_s, points)
            }
            Self::Gaussian { mean_s, sigma_s } => {
                QuadratureRule::gaussian(*mean_s, *sigma_s, points)
            }
            Self::Empirical { samples_s } => QuadratureRule {
                nodes: samples_s.clone(),
                weights: vec![1.0 / samples_s.len() as f64; samples_s.len()],
            },
        };
        let total: f64 = rule.weights.iter().sum();
        if !(total.is_finite() && (total - 1.0).abs() < 1e-9) {
            return Err(Error::Degenerate(format!(
                "quadrature weights sum to {total}"
            )));
        }
        Ok(rule)
    }
}
