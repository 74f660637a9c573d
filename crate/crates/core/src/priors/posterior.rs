//! Sampling and maximisation of `p(u) ∝ N(u | μ, σ²) · f(u | θ)`.
//!
//! Normal, half-normal, exponential and Laplace posteriors are (mixtures of)
//! truncated normals. T and Lomax priors are Gamma scale mixtures of those
//! cases and are sampled by one step of a latent-variable Gibbs chain, which
//! needs the element's current value.

use super::density::log_posterior;
use super::special::{log_add_exp, log_ndtr};
use super::{GaussianLikelihood, PriorFamily, PriorSpec};
use crate::error::{Error, Result};
use crate::sampler::{gamma, standard_normal, truncated_normal, RngHandle, TruncationRegion};

fn check(spec: &PriorSpec, lik: &GaussianLikelihood) -> Result<()> {
    spec.validate()?;
    GaussianLikelihood::new(Vec::new(), lik.sigma)?;
    if lik.mu.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite("likelihood mean"));
    }
    Ok(())
}

fn region(non_negative: bool) -> TruncationRegion {
    if non_negative {
        TruncationRegion::non_negative()
    } else {
        TruncationRegion::unbounded()
    }
}

/// Gaussian prior with variance `tau2` times the likelihood.
fn normal_posterior(mu: f64, sigma: f64, tau2: f64, positive: bool, rng: &mut RngHandle) -> Result<f64> {
    let s2 = sigma * sigma;
    let var = s2 * tau2 / (s2 + tau2);
    let mean = mu * tau2 / (tau2 + s2);
    let sd = var.sqrt();
    if positive {
        truncated_normal(mean, sd, TruncationRegion::non_negative(), rng)
    } else {
        Ok(mean + sd * standard_normal(rng))
    }
}

fn exponential_posterior(mu: f64, sigma: f64, beta: f64, rng: &mut RngHandle) -> Result<f64> {
    truncated_normal(mu - sigma * sigma / beta, sigma, TruncationRegion::non_negative(), rng)
}

/// Two truncated-normal pieces, one on each side of zero, chosen with
/// probability proportional to their mass.
fn laplace_posterior(mu: f64, sigma: f64, b: f64, rng: &mut RngHandle) -> Result<f64> {
    let shift = sigma * sigma / b;
    let log_pos = -mu / b + log_ndtr((mu - shift) / sigma);
    let log_neg = mu / b + log_ndtr(-(mu + shift) / sigma);
    let p_pos = (log_pos - log_add_exp(log_pos, log_neg)).exp();
    if rng.uniform() < p_pos {
        truncated_normal(mu - shift, sigma, TruncationRegion::non_negative(), rng)
    } else {
        truncated_normal(mu + shift, sigma, TruncationRegion::non_positive(), rng)
    }
}

/// One conditional-posterior draw per element of `lik.mu`.
///
/// `current` holds the present value of each element and is required (with
/// matching length) for the T and Lomax families, whose latent scale is
/// drawn given it. Other families ignore it.
pub fn posterior_sample(
    spec: &PriorSpec,
    lik: &GaussianLikelihood,
    current: &[f64],
    rng: &mut RngHandle,
) -> Result<Vec<f64>> {
    check(spec, lik)?;
    let compound = matches!(
        spec.family,
        PriorFamily::StudentT | PriorFamily::HalfT | PriorFamily::Lomax | PriorFamily::DoubleLomax
    );
    if compound && current.len() != lik.len() {
        return Err(Error::Shape(format!(
            "{} posterior needs {} current values, got {}",
            spec.family,
            lik.len(),
            current.len()
        )));
    }
    let sigma = lik.sigma;
    let positive = spec.family.is_non_negative();
    let mut out = Vec::with_capacity(lik.len());
    for (i, &mu) in lik.mu.iter().enumerate() {
        let u = match spec.family {
            PriorFamily::Uniform => mu + sigma * standard_normal(rng),
            PriorFamily::NonNegUniform => truncated_normal(mu, sigma, region(true), rng)?,
            PriorFamily::Normal | PriorFamily::HalfNormal => normal_posterior(mu, sigma, spec.param(0), positive, rng)?,
            PriorFamily::Exponential => exponential_posterior(mu, sigma, spec.param(0), rng)?,
            PriorFamily::Laplace => laplace_posterior(mu, sigma, spec.param(0), rng)?,
            PriorFamily::StudentT | PriorFamily::HalfT => {
                let (s, nu) = (spec.param(0), spec.param(1));
                let z = current[i] / s;
                let lambda = gamma((nu + 1.0) / 2.0, (nu + z * z) / 2.0, rng)?;
                normal_posterior(mu, sigma, s * s / lambda, positive, rng)?
            }
            PriorFamily::Lomax | PriorFamily::DoubleLomax => {
                let (beta, a) = (spec.param(0), spec.param(1));
                let rate = gamma(a + 1.0, beta + current[i].abs(), rng)?;
                if positive {
                    exponential_posterior(mu, sigma, 1.0 / rate, rng)?
                } else {
                    laplace_posterior(mu, sigma, 1.0 / rate, rng)?
                }
            }
        };
        out.push(u);
    }
    Ok(out)
}

/// Real roots of `x² + p x + q`.
fn quadratic_roots(p: f64, q: f64) -> Vec<f64> {
    let disc = p * p - 4.0 * q;
    if disc < 0.0 {
        return vec![];
    }
    let t = -0.5 * (p + p.signum() * disc.sqrt());
    if t == 0.0 {
        return vec![0.0];
    }
    vec![t, q / t]
}

/// Real roots of `x³ + b x² + c x + d`, polished by Newton steps.
fn cubic_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let f = |x: f64| ((x + b) * x + c) * x + d;
    let df = |x: f64| (3.0 * x + 2.0 * b) * x + c;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let mut roots = if disc > 0.0 {
        let a = -(q.signum()) * (q.abs() / 2.0 + disc.sqrt()).cbrt();
        let t = if a == 0.0 { 0.0 } else { a - p / (3.0 * a) };
        vec![t + shift]
    } else if p == 0.0 {
        vec![shift]
    } else {
        let r = 2.0 * (-p / 3.0).sqrt();
        let phi = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| r * (phi / 3.0 - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    };
    for x in &mut roots {
        for _ in 0..8 {
            let d = df(*x);
            if d == 0.0 {
                break;
            }
            let next = *x - f(*x) / d;
            if !next.is_finite() || f(next).abs() >= f(*x).abs() {
                break;
            }
            *x = next;
        }
    }
    roots
}

/// Stationary points of the log posterior for the T and Lomax families,
/// plus zero where the density has a boundary or a kink.
fn candidates(spec: &PriorSpec, mu: f64, sigma: f64) -> Vec<f64> {
    let s2 = sigma * sigma;
    let mut out = vec![0.0];
    match spec.family {
        PriorFamily::StudentT | PriorFamily::HalfT => {
            let (s, nu) = (spec.param(0), spec.param(1));
            let ns2 = nu * s * s;
            out.extend(cubic_roots(-mu, ns2 + s2 * (nu + 1.0), -mu * ns2));
        }
        PriorFamily::Lomax | PriorFamily::DoubleLomax => {
            let (beta, a) = (spec.param(0), spec.param(1));
            let positive = |m: f64| {
                quadratic_roots(beta - m, s2 * (a + 1.0) - m * beta)
                    .into_iter()
                    .filter(|r| *r > 0.0)
            };
            out.extend(positive(mu));
            if spec.family == PriorFamily::DoubleLomax {
                out.extend(positive(-mu).map(|r| -r));
            }
        }
        _ => unreachable!("closed-form family"),
    }
    out
}

fn numeric_mode(spec: &PriorSpec, mu: f64, sigma: f64) -> f64 {
    let non_negative = spec.family.is_non_negative();
    candidates(spec, mu, sigma)
        .into_iter()
        .filter(|u| u.is_finite() && (!non_negative || *u >= 0.0))
        .map(|u| (u, log_posterior(spec, mu, sigma, u)))
        .fold((0.0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best })
        .0
}

/// Elementwise argmax of the conditional posterior.
pub fn posterior_mode(spec: &PriorSpec, lik: &GaussianLikelihood) -> Result<Vec<f64>> {
    check(spec, lik)?;
    let s2 = lik.sigma * lik.sigma;
    let mode = |mu: f64| match spec.family {
        PriorFamily::Uniform => mu,
        PriorFamily::NonNegUniform => mu.max(0.0),
        PriorFamily::Normal => mu * spec.param(0) / (spec.param(0) + s2),
        PriorFamily::HalfNormal => (mu * spec.param(0) / (spec.param(0) + s2)).max(0.0),
        PriorFamily::Exponential => (mu - s2 / spec.param(0)).max(0.0),
        PriorFamily::Laplace => mu.signum() * (mu.abs() - s2 / spec.param(0)).max(0.0),
        _ => numeric_mode(spec, mu, lik.sigma),
    };
    Ok(lik.mu.iter().map(|&m| mode(m)).collect())
}
