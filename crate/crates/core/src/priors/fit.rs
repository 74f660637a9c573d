//! Maximum-likelihood hyperparameter updates.
//!
//! Normal, Laplace and exponential type families have closed-form
//! estimators. The T and Lomax families are Gamma scale mixtures (of normals
//! and of exponentials), and their hyperparameters are updated by one EM
//! sweep over the latent mixing variable per call, warm-started from the
//! previous estimate. Repeated calls converge to the maximum-likelihood
//! estimate; a single call never lowers the likelihood.

use statrs::function::gamma::digamma;

use super::density::total_log_density;
use super::{PriorFamily, PriorSpec};
use crate::error::{Error, Result};

/// Floor applied to every fitted scale parameter.
pub const SCALE_MIN: f64 = 1e-12;
/// Search range for the degrees of freedom ν (T) and the shape a (Lomax).
pub const DOF_MIN: f64 = 0.1;
pub const DOF_MAX: f64 = 1000.0;

const GRID_POINTS: usize = 48;
const BISECTION_STEPS: usize = 200;

/// Root of a decreasing function on `[DOF_MIN, DOF_MAX]`, clipped to the
/// range when the sign does not change. A log-spaced grid brackets the root
/// and bisection in log space refines it.
fn decreasing_root(h: impl Fn(f64) -> f64) -> f64 {
    let (lo, hi) = (DOF_MIN.ln(), DOF_MAX.ln());
    if h(DOF_MIN) <= 0.0 {
        return DOF_MIN;
    }
    if h(DOF_MAX) >= 0.0 {
        return DOF_MAX;
    }
    let step = (hi - lo) / GRID_POINTS as f64;
    let mut left = lo;
    let mut right = hi;
    for i in 1..=GRID_POINTS {
        let x = lo + step * i as f64;
        if h(x.exp()) < 0.0 {
            left = x - step;
            right = x;
            break;
        }
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (left + right);
        if h(mid.exp()) >= 0.0 {
            left = mid;
        } else {
            right = mid;
        }
        if right - left < 1e-13 {
            break;
        }
    }
    (0.5 * (left + right)).exp()
}

fn mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// One EM sweep for a zero-located T distribution with scale `s` and `nu`
/// degrees of freedom, written as `u | λ ~ N(0, s²/λ)`, `λ ~ Gamma(ν/2, ν/2)`.
fn t_em_step(values: &[f64], s: f64, nu: f64) -> (f64, f64) {
    let n = values.len();
    let weights: Vec<f64> = values
        .iter()
        .map(|&u| {
            let z = u / s;
            (nu + 1.0) / (nu + z * z)
        })
        .collect();
    let s2 = mean(values.iter().zip(&weights).map(|(u, w)| w * u * u), n);
    let s_new = s2.sqrt().max(SCALE_MIN);
    let c = mean(weights.iter().map(|w| w.ln() - w), n) + digamma((nu + 1.0) / 2.0) - ((nu + 1.0) / 2.0).ln();
    let nu_new = decreasing_root(|x| -digamma(x / 2.0) + (x / 2.0).ln() + 1.0 + c);
    (s_new, nu_new)
}

/// One EM sweep for a Lomax distribution written as `u | r ~ Exp(rate r)`,
/// `r ~ Gamma(a, rate β)`. The M-step is the Gamma MLE given the expected
/// sufficient statistics `E[r]` and `E[log r]`.
fn lomax_em_step(values: &[f64], beta: f64, a: f64) -> (f64, f64) {
    let n = values.len();
    let psi = digamma(a + 1.0);
    let mean_rate = mean(values.iter().map(|&u| (a + 1.0) / (beta + u)), n);
    let mean_log_rate = mean(values.iter().map(|&u| psi - (beta + u).ln()), n);
    let target = mean_rate.ln() - mean_log_rate;
    let a_new = decreasing_root(|x| x.ln() - digamma(x) - target);
    let beta_new = (a_new / mean_rate).max(SCALE_MIN);
    (beta_new, a_new)
}

fn initial_params(family: PriorFamily, values: &[f64]) -> Vec<f64> {
    let n = values.len();
    match family {
        PriorFamily::StudentT | PriorFamily::HalfT => {
            let rms = mean(values.iter().map(|u| u * u), n).sqrt();
            vec![rms.max(SCALE_MIN), 3.0]
        }
        PriorFamily::Lomax | PriorFamily::DoubleLomax => {
            let m = mean(values.iter().map(|u| u.abs()), n);
            vec![(2.0 * m).max(SCALE_MIN), 3.0]
        }
        _ => family.default_params(),
    }
}

/// Maximum-likelihood update of the hyperparameters of `family` given
/// `values`.
///
/// `warm_start` seeds the iterative T and Lomax updates and is ignored by
/// the closed-form families. The returned hyperparameters never have a lower
/// likelihood than `warm_start`.
pub fn fit_ml(family: PriorFamily, values: &[f64], warm_start: Option<&[f64]>) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit_ml values"));
    }
    if !family.is_proper() {
        return Ok(vec![]);
    }
    if values.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: values.len(),
        });
    }
    if family.is_non_negative() {
        if let Some(bad) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidParams(format!(
                "{family} cannot be fitted to negative value {bad}"
            )));
        }
    }
    let n = values.len();
    let fitted = match family {
        PriorFamily::Normal | PriorFamily::HalfNormal => {
            vec![mean(values.iter().map(|u| u * u), n).max(SCALE_MIN)]
        }
        PriorFamily::Laplace | PriorFamily::Exponential => {
            vec![mean(values.iter().map(|u| u.abs()), n).max(SCALE_MIN)]
        }
        PriorFamily::StudentT | PriorFamily::HalfT | PriorFamily::Lomax | PriorFamily::DoubleLomax => {
            let start = match warm_start {
                Some(w) => {
                    PriorSpec::new(family, w.to_vec())?;
                    w.to_vec()
                }
                None => initial_params(family, values),
            };
            let (p0, p1) = if matches!(family, PriorFamily::StudentT | PriorFamily::HalfT) {
                t_em_step(values, start[0], start[1])
            } else {
                let abs: Vec<f64> = values.iter().map(|u| u.abs()).collect();
                lomax_em_step(&abs, start[0], start[1])
            };
            let candidate = vec![p0, p1];
            let ll = |p: &[f64]| {
                let spec = PriorSpec {
                    family,
                    params: p.to_vec(),
                };
                total_log_density(&spec, values).unwrap_or(f64::NEG_INFINITY)
            };
            if ll(&candidate) >= ll(&start) {
                candidate
            } else {
                start
            }
        }
        PriorFamily::Uniform | PriorFamily::NonNegUniform => unreachable!(),
    };
    Ok(fitted)
}
