//! Independent reference implementations for integration tests.
//!
//! Nothing here calls into the crate's numerical code: densities, CDFs and
//! optimisers are written out from their textbook definitions.

#![allow(dead_code)]

use std::f64::consts::{LN_2, PI, SQRT_2};

use decompose::PriorFamily;

pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// CDF of the standard normal truncated to `[a, b]`, evaluated on the
/// tail that avoids cancellation.
pub fn truncnorm_cdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= a {
        return 0.0;
    }
    if x >= b {
        return 1.0;
    }
    if a > 0.0 {
        (norm_sf(a) - norm_sf(x)) / (norm_sf(a) - norm_sf(b))
    } else {
        (norm_cdf(x) - norm_cdf(a)) / (norm_cdf(b) - norm_cdf(a))
    }
}

/// Asymptotic Kolmogorov survival function with Stephens' small-sample
/// correction.
pub fn kolmogorov_sf(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut total = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        total += if (k as i64) % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * total).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov statistic and p-value.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    (d, kolmogorov_sf(d, x.len()))
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn variance(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64
}

/// Log prior density written out per family. Parameter order: Normal and
/// HalfNormal `[τ²]`; Laplace `[b]`; Exponential `[β]`; StudentT and HalfT
/// `[s, ν]`; Lomax and DoubleLomax `[β, a]`.
pub fn log_prior(family: PriorFamily, p: &[f64], x: f64) -> f64 {
    use PriorFamily::*;
    let nonneg = matches!(family, NonNegUniform | HalfNormal | Exponential | HalfT | Lomax);
    if nonneg && x < 0.0 {
        return f64::NEG_INFINITY;
    }
    match family {
        Uniform | NonNegUniform => 0.0,
        Normal => -0.5 * (2.0 * PI * p[0]).ln() - x * x / (2.0 * p[0]),
        HalfNormal => LN_2 - 0.5 * (2.0 * PI * p[0]).ln() - x * x / (2.0 * p[0]),
        Laplace => -(2.0 * p[0]).ln() - x.abs() / p[0],
        Exponential => -p[0].ln() - x / p[0],
        StudentT | HalfT => {
            let (s, nu) = (p[0], p[1]);
            let base = libm::lgamma((nu + 1.0) / 2.0)
                - libm::lgamma(nu / 2.0)
                - 0.5 * (nu * PI).ln()
                - s.ln()
                - (nu + 1.0) / 2.0 * (1.0 + x * x / (nu * s * s)).ln();
            if family == HalfT {
                base + LN_2
            } else {
                base
            }
        }
        Lomax => p[1].ln() - p[0].ln() - (p[1] + 1.0) * (1.0 + x / p[0]).ln(),
        DoubleLomax => -LN_2 + p[1].ln() - p[0].ln() - (p[1] + 1.0) * (1.0 + x.abs() / p[0]).ln(),
    }
}

/// Unnormalised log of `N(x | μ, σ²) · prior(x)`.
pub fn log_post(family: PriorFamily, p: &[f64], mu: f64, sigma: f64, x: f64) -> f64 {
    let d = (x - mu) / sigma;
    -0.5 * d * d + log_prior(family, p, x)
}

/// Argmax of `f` over `n` equally spaced points of `[lo, hi]`.
pub fn grid_argmax(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    let mut best = (f64::NEG_INFINITY, lo);
    for i in 0..n {
        let x = lo + h * i as f64;
        let v = f(x);
        if v > best.0 {
            best = (v, x);
        }
    }
    best.1
}

/// Nelder-Mead minimisation.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        simplex.push(p);
    }
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = values[n] - values[0];
        if spread.abs() < 1e-13 * (1.0 + values[0].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + t * (simplex[n][j] - centroid[j]))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let xc = if fr < values[n] { along(-0.5) } else { along(0.5) };
            let fc = f(&xc);
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    for j in 0..n {
                        simplex[i][j] = simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]);
                    }
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    simplex[best].clone()
}

/// Maximum-likelihood θ by direct numerical optimisation of the summed
/// log density over log-parameters.
pub fn numerical_mle(family: PriorFamily, values: &[f64], start: &[f64]) -> Vec<f64> {
    let nll = |lp: &[f64]| -> f64 {
        let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
        -values.iter().map(|&x| log_prior(family, &p, x)).sum::<f64>()
    };
    let x0: Vec<f64> = start.iter().map(|v| v.ln()).collect();
    let mut best = nelder_mead(nll, &x0, 0.3, 2000);
    // Restarting from the optimum removes premature simplex collapse.
    for _ in 0..3 {
        best = nelder_mead(nll, &best, 0.05, 2000);
    }
    best.iter().map(|v| v.exp()).collect()
}

/// CDF of the density `exp(logf)` on `[lo, hi]` by the trapezoid rule on
/// `n` intervals, returned as (grid, cdf) for interpolation.
pub fn quadrature_cdf(lo: f64, hi: f64, n: usize, logf: impl Fn(f64) -> f64) -> (Vec<f64>, Vec<f64>) {
    let h = (hi - lo) / n as f64;
    let xs: Vec<f64> = (0..=n).map(|i| lo + h * i as f64).collect();
    let lf: Vec<f64> = xs.iter().map(|&x| logf(x)).collect();
    let peak = lf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let f: Vec<f64> = lf.iter().map(|v| (v - peak).exp()).collect();
    let mut cdf = vec![0.0; n + 1];
    for i in 1..=n {
        cdf[i] = cdf[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    }
    let total = cdf[n];
    cdf.iter_mut().for_each(|c| *c /= total);
    (xs, cdf)
}

pub fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    if x <= xs[0] {
        return 0.0;
    }
    if x >= xs[xs.len() - 1] {
        return 1.0;
    }
    let h = xs[1] - xs[0];
    let i = (((x - xs[0]) / h) as usize).min(xs.len() - 2);
    let t = (x - xs[i]) / h;
    ys[i] + t * (ys[i + 1] - ys[i])
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Max-norm relative difference of two vectors.
pub fn rel_vec(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(f64::MIN_POSITIVE, f64::max);
    diff / scale
}
