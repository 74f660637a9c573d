//! Prior families for the factor columns.
//!
//! Each family supplies four operations: its log density, a maximum
//! likelihood update of its hyperparameters, and the sample and mode of the
//! conditional posterior `N(u | μ, σ²) · f(u | θ)` that arises when a column
//! is updated.
//!
//! Hyperparameter vectors (`θ`), by family:
//!
//! | family          | θ          | support  |
//! |-----------------|------------|----------|
//! | `Uniform`       | none       | ℝ        |
//! | `NonNegUniform` | none       | [0, ∞)   |
//! | `Normal`        | (τ²)       | ℝ        |
//! | `HalfNormal`    | (τ²)       | [0, ∞)   |
//! | `Laplace`       | (b)        | ℝ        |
//! | `Exponential`   | (β)        | [0, ∞)   |
//! | `StudentT`      | (s, ν)     | ℝ        |
//! | `HalfT`         | (s, ν)     | [0, ∞)   |
//! | `DoubleLomax`   | (β, a)     | ℝ        |
//! | `Lomax`         | (β, a)     | [0, ∞)   |
//!
//! All families are centred at zero. The two uniform families are improper.

mod density;
mod draw;
mod fit;
mod posterior;
mod special;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use density::{in_support, log_density, log_density_at, log_posterior, total_log_density};
pub use draw::draw_prior;
pub use fit::{fit_ml, DOF_MAX, DOF_MIN, SCALE_MIN};
pub use posterior::{posterior_mode, posterior_sample};
pub use special::log_ndtr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriorFamily {
    Uniform,
    NonNegUniform,
    Normal,
    HalfNormal,
    Laplace,
    Exponential,
    StudentT,
    HalfT,
    DoubleLomax,
    Lomax,
}

impl PriorFamily {
    pub const ALL: [PriorFamily; 10] = [
        PriorFamily::Uniform,
        PriorFamily::NonNegUniform,
        PriorFamily::Normal,
        PriorFamily::HalfNormal,
        PriorFamily::Laplace,
        PriorFamily::Exponential,
        PriorFamily::StudentT,
        PriorFamily::HalfT,
        PriorFamily::DoubleLomax,
        PriorFamily::Lomax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PriorFamily::Uniform => "Uniform",
            PriorFamily::NonNegUniform => "NonNegUniform",
            PriorFamily::Normal => "Normal",
            PriorFamily::HalfNormal => "HalfNormal",
            PriorFamily::Laplace => "Laplace",
            PriorFamily::Exponential => "Exponential",
            PriorFamily::StudentT => "StudentT",
            PriorFamily::HalfT => "HalfT",
            PriorFamily::DoubleLomax => "DoubleLomax",
            PriorFamily::Lomax => "Lomax",
        }
    }

    pub fn is_non_negative(self) -> bool {
        matches!(
            self,
            PriorFamily::NonNegUniform
                | PriorFamily::HalfNormal
                | PriorFamily::Exponential
                | PriorFamily::HalfT
                | PriorFamily::Lomax
        )
    }

    pub fn is_proper(self) -> bool {
        !matches!(self, PriorFamily::Uniform | PriorFamily::NonNegUniform)
    }

    pub fn param_count(self) -> usize {
        match self {
            PriorFamily::Uniform | PriorFamily::NonNegUniform => 0,
            PriorFamily::Normal | PriorFamily::HalfNormal | PriorFamily::Laplace | PriorFamily::Exponential => 1,
            PriorFamily::StudentT | PriorFamily::HalfT | PriorFamily::DoubleLomax | PriorFamily::Lomax => 2,
        }
    }

    /// Initial hyperparameters: unit scales, and 3 for ν and a.
    pub fn default_params(self) -> Vec<f64> {
        match self.param_count() {
            0 => vec![],
            1 => vec![1.0],
            _ => vec![1.0, 3.0],
        }
    }
}

impl fmt::Display for PriorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PriorFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PriorFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown prior family '{s}'")))
    }
}

/// A prior family together with its hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub family: PriorFamily,
    #[serde(default)]
    pub params: Vec<f64>,
}

impl PriorSpec {
    pub fn new(family: PriorFamily, params: Vec<f64>) -> Result<Self> {
        let spec = Self { family, params };
        spec.validate()?;
        Ok(spec)
    }

    /// The family with its default hyperparameters.
    pub fn default_for(family: PriorFamily) -> Self {
        Self {
            family,
            params: family.default_params(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.family.param_count() {
            return Err(Error::InvalidParams(format!(
                "{} takes {} hyperparameters, got {}",
                self.family,
                self.family.param_count(),
                self.params.len()
            )));
        }
        if let Some(bad) = self.params.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(Error::InvalidParams(format!(
                "{} hyperparameters must be positive and finite, got {bad}",
                self.family
            )));
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn param(&self, i: usize) -> f64 {
        self.params[i]
    }
}

/// Gaussian likelihood of one column: element `i` has mean `mu[i]`, and all
/// elements share the standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianLikelihood {
    pub mu: Vec<f64>,
    pub sigma: f64,
}

impl GaussianLikelihood {
    pub fn new(mu: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "likelihood sigma must be positive, got {sigma}"
            )));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::NonFinite("likelihood mean"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }
}
