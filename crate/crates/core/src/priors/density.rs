use statrs::function::gamma::ln_gamma;

use super::{PriorFamily, PriorSpec};

const LN_2: f64 = std::f64::consts::LN_2;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn in_support(family: PriorFamily, x: f64) -> bool {
    x.is_finite() && (!family.is_non_negative() || x >= 0.0)
}

/// `log f(x | θ)`; `-∞` outside the support. Improper families give 0 on
/// their support.
pub fn log_density_at(spec: &PriorSpec, x: f64) -> f64 {
    if !in_support(spec.family, x) {
        return f64::NEG_INFINITY;
    }
    match spec.family {
        PriorFamily::Uniform | PriorFamily::NonNegUniform => 0.0,
        PriorFamily::Normal | PriorFamily::HalfNormal => {
            let tau2 = spec.param(0);
            let half = if spec.family == PriorFamily::HalfNormal {
                LN_2
            } else {
                0.0
            };
            half - 0.5 * (LN_2PI + tau2.ln()) - x * x / (2.0 * tau2)
        }
        PriorFamily::Laplace => {
            let b = spec.param(0);
            -(2.0 * b).ln() - x.abs() / b
        }
        PriorFamily::Exponential => {
            let beta = spec.param(0);
            -beta.ln() - x / beta
        }
        PriorFamily::StudentT | PriorFamily::HalfT => {
            let (s, nu) = (spec.param(0), spec.param(1));
            let half = if spec.family == PriorFamily::HalfT { LN_2 } else { 0.0 };
            let z = x / s;
            half + ln_gamma((nu + 1.0) / 2.0)
                - ln_gamma(nu / 2.0)
                - 0.5 * (nu * std::f64::consts::PI).ln()
                - s.ln()
                - (nu + 1.0) / 2.0 * (z * z / nu).ln_1p()
        }
        PriorFamily::Lomax | PriorFamily::DoubleLomax => {
            let (beta, a) = (spec.param(0), spec.param(1));
            let half = if spec.family == PriorFamily::DoubleLomax {
                -LN_2
            } else {
                0.0
            };
            half + a.ln() - beta.ln() - (a + 1.0) * (x.abs() / beta).ln_1p()
        }
    }
}

/// Elementwise log density.
pub fn log_density(spec: &PriorSpec, values: &[f64]) -> Vec<f64> {
    values.iter().map(|&x| log_density_at(spec, x)).collect()
}

/// Sum of log densities, or `None` if any value lies outside the support.
pub fn total_log_density(spec: &PriorSpec, values: &[f64]) -> Option<f64> {
    let mut total = 0.0;
    for &x in values {
        let l = log_density_at(spec, x);
        if l == f64::NEG_INFINITY {
            return None;
        }
        total += l;
    }
    Some(total)
}

/// Unnormalised log conditional posterior `log N(x | mu, sigma²) + log f(x)`
/// without the Gaussian normalising constant.
pub fn log_posterior(spec: &PriorSpec, mu: f64, sigma: f64, x: f64) -> f64 {
    let d = (x - mu) / sigma;
    -0.5 * d * d + log_density_at(spec, x)
}
