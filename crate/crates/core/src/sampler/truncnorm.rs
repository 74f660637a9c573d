//! Exact sampling from truncated normal distributions.
//!
//! Every element is standardised to `[a, b]` and routed to one of three
//! accept-reject schemes:
//!
//! * normal rejection: draw from the untruncated normal until the draw lands
//!   in the region (used when the region covers the bulk of the density),
//! * uniform rejection: draw uniformly on a narrow finite interval and accept
//!   with the ratio of the density to its maximum on the interval,
//! * exponential rejection: a translated exponential proposal with the
//!   optimal rate for one-sided tails (Robert, 1995), also used for far tails.

use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::RngHandle;
use crate::error::{Error, Result};

/// Lower bound below which plain normal rejection beats the optimal
/// exponential proposal on `[a, ∞)`. Root of `√(2π) λ exp((λa − 1)/2) = 1`
/// with `λ = (a + √(a² + 4))/2`.
pub const EXP_TAIL_CROSSOVER: f64 = -0.469_839_350_257_501_3;

/// Width below which uniform rejection is used for intervals containing 0.
pub const UNIFORM_WIDTH_AT_ORIGIN: f64 = 2.506_628_274_631_000_5; // √(2π)

/// Standardised bounds beyond this magnitude are treated as infinite when
/// they open the region and as an empty region when they close it.
pub const MAX_STANDARDIZED_BOUND: f64 = 1e10;

/// Scheme chosen for one standardised region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Normal,
    Uniform,
    Exponential,
    /// Exponential rejection on the mirrored region `[-b, -a]`.
    MirroredExponential,
    MirroredUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationRegion {
    lower: f64,
    upper: f64,
}

impl TruncationRegion {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if lower.is_nan() || upper.is_nan() || lower >= upper {
            return Err(Error::InvalidParams(format!(
                "truncation region needs lower < upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub const fn unbounded() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }

    pub const fn non_negative() -> Self {
        Self {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }

    pub const fn non_positive() -> Self {
        Self {
            lower: f64::NEG_INFINITY,
            upper: 0.0,
        }
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }
}

/// Largest interval width `b - a` (with `a ≥ 0`) for which uniform rejection
/// is cheaper than exponential rejection.
pub fn uniform_width_threshold(a: f64) -> f64 {
    let root = (a * a + 4.0).sqrt();
    2.0 * std::f64::consts::E.sqrt() / (a + root) * ((a * a - a * root) / 4.0).exp()
}

/// Dispatch rule on a standardised region `a < b`.
pub fn choose_scheme(a: f64, b: f64) -> Scheme {
    if a <= 0.0 && b >= 0.0 {
        if b - a < UNIFORM_WIDTH_AT_ORIGIN {
            Scheme::Uniform
        } else if a >= EXP_TAIL_CROSSOVER && b.is_infinite() {
            Scheme::Exponential
        } else if b <= -EXP_TAIL_CROSSOVER && a.is_infinite() {
            Scheme::MirroredExponential
        } else {
            Scheme::Normal
        }
    } else if a > 0.0 {
        if b - a <= uniform_width_threshold(a) {
            Scheme::Uniform
        } else {
            Scheme::Exponential
        }
    } else if b - a <= uniform_width_threshold(-b) {
        Scheme::MirroredUniform
    } else {
        Scheme::MirroredExponential
    }
}

fn standard_normal(rng: &mut RngHandle) -> f64 {
    StandardNormal.sample(rng)
}

fn normal_rejection(a: f64, b: f64, rng: &mut RngHandle) -> f64 {
    loop {
        let z = standard_normal(rng);
        if z >= a && z <= b {
            return z;
        }
    }
}

/// Uniform proposal on `[a, b]`; the envelope is the density maximum on the
/// interval, attained at the point closest to 0.
fn uniform_rejection(a: f64, b: f64, rng: &mut RngHandle) -> f64 {
    let peak = if a > 0.0 {
        a
    } else if b < 0.0 {
        b
    } else {
        0.0
    };
    loop {
        let z = a + (b - a) * rng.uniform();
        let log_ratio = (peak * peak - z * z) / 2.0;
        if rng.uniform().ln() <= log_ratio {
            return z;
        }
    }
}

/// Translated exponential proposal on `[a, ∞)`, rejecting draws above `b`.
fn exponential_rejection(a: f64, b: f64, rng: &mut RngHandle) -> f64 {
    let rate = (a + (a * a + 4.0).sqrt()) / 2.0;
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / rate;
        if z > b {
            continue;
        }
        let d = z - rate;
        if rng.uniform().ln() <= -d * d / 2.0 {
            return z;
        }
    }
}

/// One draw from the standard normal restricted to `[a, b]`.
pub fn truncated_standard_normal(a: f64, b: f64, rng: &mut RngHandle) -> Result<f64> {
    if a.is_nan() || b.is_nan() || a >= b {
        return Err(Error::EmptyRegion { lower: a, upper: b });
    }
    if a > MAX_STANDARDIZED_BOUND || b < -MAX_STANDARDIZED_BOUND {
        return Err(Error::EmptyRegion { lower: a, upper: b });
    }
    let a = if a < -MAX_STANDARDIZED_BOUND {
        f64::NEG_INFINITY
    } else {
        a
    };
    let b = if b > MAX_STANDARDIZED_BOUND { f64::INFINITY } else { b };
    let z = match choose_scheme(a, b) {
        Scheme::Normal => normal_rejection(a, b, rng),
        Scheme::Uniform => uniform_rejection(a, b, rng),
        Scheme::Exponential => exponential_rejection(a, b, rng),
        Scheme::MirroredUniform => -uniform_rejection(-b, -a, rng),
        Scheme::MirroredExponential => -exponential_rejection(-b, -a, rng),
    };
    Ok(z)
}

/// One draw from `N(mu, sigma²)` restricted to `region`.
pub fn truncated_normal(mu: f64, sigma: f64, region: TruncationRegion, rng: &mut RngHandle) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParams(format!("sigma must be positive, got {sigma}")));
    }
    if !mu.is_finite() {
        return Err(Error::NonFinite("truncated normal mean"));
    }
    let a = (region.lower - mu) / sigma;
    let b = (region.upper - mu) / sigma;
    let z = truncated_standard_normal(a, b, rng)?;
    // Rounding in the affine map can step just outside a finite bound.
    Ok((mu + sigma * z).clamp(region.lower, region.upper))
}

fn broadcast<T: Copy>(values: &[T], i: usize) -> T {
    if values.len() == 1 {
        values[0]
    } else {
        values[i]
    }
}

/// Vectorised truncated normal sampling.
///
/// `sigma` and `regions` either have one entry (broadcast) or one per
/// element of `mu`. Elements are drawn in order from the same stream, so the
/// result equals `mu.len()` scalar calls.
pub fn sample_truncated_normal(
    mu: &[f64],
    sigma: &[f64],
    regions: &[TruncationRegion],
    rng: &mut RngHandle,
) -> Result<Vec<f64>> {
    let n = mu.len();
    for (name, len) in [("sigma", sigma.len()), ("regions", regions.len())] {
        if len != 1 && len != n {
            return Err(Error::Shape(format!("{name} has length {len}, expected 1 or {n}")));
        }
    }
    (0..n)
        .map(|i| truncated_normal(mu[i], broadcast(sigma, i), broadcast(regions, i), rng))
        .collect()
}
