mod common;

use common::{grid_argmax, interp, ks_test, log_post, log_prior, mean, numerical_mle, quadrature_cdf, variance};
use decompose::priors::{draw_prior, fit_ml, posterior_mode, posterior_sample};
use decompose::{GaussianLikelihood, PriorFamily, PriorSpec, RngHandle};
use rand_distr::{Distribution, Exp, Normal as Gauss, StudentT as TDist};

const PROPER: [PriorFamily; 8] = [
    PriorFamily::Normal,
    PriorFamily::HalfNormal,
    PriorFamily::Laplace,
    PriorFamily::Exponential,
    PriorFamily::StudentT,
    PriorFamily::HalfT,
    PriorFamily::DoubleLomax,
    PriorFamily::Lomax,
];

fn spec(family: PriorFamily, params: &[f64]) -> PriorSpec {
    PriorSpec::new(family, params.to_vec()).unwrap()
}

fn random_params(family: PriorFamily, rng: &mut RngHandle) -> Vec<f64> {
    let scale = 0.2 + 3.0 * rng.uniform();
    match family.param_count() {
        0 => vec![],
        1 => vec![scale],
        _ => vec![scale, 0.5 + 10.0 * rng.uniform()],
    }
}

fn posterior_range(family: PriorFamily, mu: f64, sigma: f64) -> (f64, f64) {
    let lo = mu.min(0.0) - 12.0 * sigma;
    let hi = mu.max(0.0) + 12.0 * sigma;
    if family.is_non_negative() {
        (0.0, hi)
    } else {
        (lo, hi)
    }
}

#[test]
fn modes_match_grid_argmax() {
    let mut rng = RngHandle::new(100, 0);
    for family in PriorFamily::ALL {
        for _ in 0..20 {
            let p = random_params(family, &mut rng);
            let mu = -3.0 + 6.0 * rng.uniform();
            let sigma = 0.1 + 1.9 * rng.uniform();
            let lik = GaussianLikelihood::new(vec![mu], sigma).unwrap();
            let mode = posterior_mode(&spec(family, &p), &lik).unwrap()[0];
            let (lo, hi) = posterior_range(family, mu, sigma);
            let n = 400_001;
            let grid = grid_argmax(lo, hi, n, |x| log_post(family, &p, mu, sigma, x));
            let h = (hi - lo) / (n - 1) as f64;
            // Near-ties between separated modes are settled by value.
            let gap = log_post(family, &p, mu, sigma, grid) - log_post(family, &p, mu, sigma, mode);
            assert!(
                (mode - grid).abs() <= 2.0 * h || gap < 1e-9,
                "{family} {p:?} mu {mu} sigma {sigma}: mode {mode}, grid {grid}"
            );
        }
    }
}

#[test]
fn modes_are_local_maxima() {
    let mut rng = RngHandle::new(101, 0);
    for family in PriorFamily::ALL {
        for _ in 0..50 {
            let p = random_params(family, &mut rng);
            let mu = -5.0 + 10.0 * rng.uniform();
            let sigma = 0.05 + 3.0 * rng.uniform();
            let lik = GaussianLikelihood::new(vec![mu], sigma).unwrap();
            let m = posterior_mode(&spec(family, &p), &lik).unwrap()[0];
            let f = |x: f64| log_post(family, &p, mu, sigma, x);
            let d = 1e-4 * sigma;
            assert!(f(m) >= f(m + d) - 1e-12, "{family} at {m}");
            assert!(
                f(m) >= f(m - d) - 1e-12 || f(m - d) == f64::NEG_INFINITY,
                "{family} at {m}"
            );
        }
    }
}

#[test]
fn wide_laplace_mode_is_the_mean() {
    let mu = vec![-3.0, -0.1, 0.0, 0.2, 7.5];
    let lik = GaussianLikelihood::new(mu.clone(), 0.7).unwrap();
    let mode = posterior_mode(&spec(PriorFamily::Laplace, &[1e8]), &lik).unwrap();
    for (m, x) in mode.iter().zip(&mu) {
        assert!((m - x).abs() < 1e-6);
    }
}

/// Draws `n` samples from the conditional posterior. Families with latent
/// augmentation are run as independent chains started at `mu`.
fn posterior_draws(s: &PriorSpec, mu: f64, sigma: f64, n: usize, rng: &mut RngHandle) -> Vec<f64> {
    let lik = GaussianLikelihood::new(vec![mu; n], sigma).unwrap();
    let augmented = matches!(
        s.family,
        PriorFamily::StudentT | PriorFamily::HalfT | PriorFamily::Lomax | PriorFamily::DoubleLomax
    );
    let start = if s.family.is_non_negative() { mu.max(0.0) } else { mu };
    let mut current = vec![start; n];
    let steps = if augmented { 40 } else { 1 };
    for _ in 0..steps {
        current = posterior_sample(s, &lik, &current, rng).unwrap();
    }
    current
}

#[test]
fn posterior_samples_match_quadrature() {
    let mut rng = RngHandle::new(102, 0);
    let configs = [(0.8, 0.5), (-0.6, 0.4), (2.5, 1.0), (0.0, 2.0)];
    for family in PriorFamily::ALL {
        let p = match family.param_count() {
            0 => vec![],
            1 => vec![0.7],
            _ => vec![0.9, 3.0],
        };
        let s = spec(family, &p);
        for &(mu, sigma) in &configs {
            let x = posterior_draws(&s, mu, sigma, 20_000, &mut rng);
            let (lo, hi) = posterior_range(family, mu, sigma);
            let (xs, cdf) = quadrature_cdf(lo, hi, 200_000, |v| log_post(family, &p, mu, sigma, v));
            let (d, pv) = ks_test(&x, |v| interp(&xs, &cdf, v));
            assert!(pv > 0.001, "{family} mu {mu} sigma {sigma}: D {d}, p {pv}");
        }
    }
}

#[test]
fn t_augmentation_marginal() {
    let (s, nu, mu, sigma) = (1.0, 4.0, 1.0, 1.0);
    let mut rng = RngHandle::new(103, 0);
    let x = posterior_draws(&spec(PriorFamily::StudentT, &[s, nu]), mu, sigma, 100_000, &mut rng);
    let (xs, cdf) = quadrature_cdf(-15.0, 17.0, 400_000, |v| {
        log_post(PriorFamily::StudentT, &[s, nu], mu, sigma, v)
    });
    let (d, _) = ks_test(&x, |v| interp(&xs, &cdf, v));
    assert!(d < 0.01, "Kolmogorov distance {d}");
}

#[test]
fn normal_posterior_moments() {
    let (tau2, mu, sigma) = (2.0, 1.5, 0.8);
    let n = 100_000;
    let mut rng = RngHandle::new(104, 0);
    let x = posterior_draws(&spec(PriorFamily::Normal, &[tau2]), mu, sigma, n, &mut rng);
    let s2 = sigma * sigma;
    let post_var = 1.0 / (1.0 / s2 + 1.0 / tau2);
    let post_mean = post_var * mu / s2;
    let se_mean = (post_var / n as f64).sqrt();
    let se_var = post_var * (2.0 / (n as f64 - 1.0)).sqrt();
    assert!((mean(&x) - post_mean).abs() < 3.0 * se_mean);
    assert!((variance(&x) - post_var).abs() < 3.0 * se_var);
}

#[test]
fn non_negative_samples_stay_non_negative() {
    let mut rng = RngHandle::new(105, 0);
    for family in PriorFamily::ALL.into_iter().filter(|f| f.is_non_negative()) {
        let p = family.default_params();
        let x = posterior_draws(&spec(family, &p), -2.0, 1.0, 1_000_000, &mut rng);
        assert!(x.iter().all(|&v| v >= 0.0), "{family}");
    }
}

/// Draws from each family with generators independent of the crate.
fn oracle_draws(family: PriorFamily, p: &[f64], n: usize, rng: &mut RngHandle) -> Vec<f64> {
    use PriorFamily::*;
    let sign = |rng: &mut RngHandle| if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
    (0..n)
        .map(|_| match family {
            Normal => Gauss::new(0.0, p[0].sqrt()).unwrap().sample(rng),
            HalfNormal => Gauss::new(0.0, p[0].sqrt()).unwrap().sample(rng).abs(),
            Laplace => sign(rng) * Exp::new(1.0 / p[0]).unwrap().sample(rng),
            Exponential => Exp::new(1.0 / p[0]).unwrap().sample(rng),
            StudentT => p[0] * TDist::new(p[1]).unwrap().sample(rng),
            HalfT => (p[0] * TDist::new(p[1]).unwrap().sample(rng)).abs(),
            Lomax => p[0] * (rng.uniform_open().powf(-1.0 / p[1]) - 1.0),
            DoubleLomax => sign(rng) * p[0] * (rng.uniform_open().powf(-1.0 / p[1]) - 1.0),
            Uniform | NonNegUniform => unreachable!(),
        })
        .collect()
}

fn fit_to_convergence(family: PriorFamily, values: &[f64]) -> Vec<f64> {
    let mut theta = fit_ml(family, values, None).unwrap();
    for _ in 0..5000 {
        let next = fit_ml(family, values, Some(&theta)).unwrap();
        let change = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| ((a - b) / b).abs())
            .fold(0.0, f64::max);
        theta = next;
        if change < 1e-12 {
            break;
        }
    }
    theta
}

#[test]
fn ml_estimates_recover_truth_and_match_numerical_optimum() {
    let truth: [(PriorFamily, &[f64]); 8] = [
        (PriorFamily::Normal, &[4.0]),
        (PriorFamily::HalfNormal, &[0.5]),
        (PriorFamily::Laplace, &[1.5]),
        (PriorFamily::Exponential, &[0.7]),
        (PriorFamily::StudentT, &[2.0, 5.0]),
        (PriorFamily::HalfT, &[0.5, 3.0]),
        (PriorFamily::DoubleLomax, &[1.0, 4.0]),
        (PriorFamily::Lomax, &[2.0, 3.0]),
    ];
    let mut rng = RngHandle::new(106, 0);
    for (family, p) in truth {
        let x = oracle_draws(family, p, 100_000, &mut rng);
        let fitted = fit_to_convergence(family, &x);
        let oracle = numerical_mle(family, &x, &family.default_params());
        for i in 0..p.len() {
            let tol = if i == 0 { 0.05 } else { 0.15 };
            assert!(
                (fitted[i] / p[i] - 1.0).abs() < tol,
                "{family}: fitted {fitted:?}, truth {p:?}"
            );
            assert!(
                (fitted[i] / oracle[i] - 1.0).abs() < 1e-3,
                "{family}: fitted {fitted:?}, oracle {oracle:?}"
            );
        }
    }
}

#[test]
fn every_fit_call_is_an_improvement() {
    let mut rng = RngHandle::new(107, 0);
    for family in PROPER {
        let p = family.default_params();
        let x = oracle_draws(family, &p, 5_000, &mut rng);
        let ll = |t: &[f64]| x.iter().map(|&v| log_prior(family, t, v)).sum::<f64>();
        let mut theta = vec![p[0] * 5.0; p.len()];
        if p.len() == 2 {
            theta[1] = 50.0;
        }
        for _ in 0..30 {
            let next = fit_ml(family, &x, Some(&theta)).unwrap();
            assert!(ll(&next) >= ll(&theta) - 1e-9 * ll(&theta).abs(), "{family}");
            theta = next;
        }
    }
}

#[test]
fn closed_form_refits_are_idempotent() {
    let mut rng = RngHandle::new(108, 0);
    for family in [
        PriorFamily::Normal,
        PriorFamily::HalfNormal,
        PriorFamily::Laplace,
        PriorFamily::Exponential,
    ] {
        let x = oracle_draws(family, &[1.3], 1000, &mut rng);
        let a = fit_ml(family, &x, None).unwrap();
        let b = fit_ml(family, &x, Some(&a)).unwrap();
        assert!(((a[0] - b[0]) / a[0]).abs() < 1e-9);
    }
}

#[test]
fn prior_draws_follow_the_prior() {
    let mut rng = RngHandle::new(109, 0);
    for family in PROPER {
        let p = match family.param_count() {
            1 => vec![1.7],
            _ => vec![1.2, 4.5],
        };
        let x = draw_prior(&spec(family, &p), 50_000, &mut rng).unwrap();
        if family.is_non_negative() {
            assert!(x.iter().all(|&v| v >= 0.0));
        }
        let q = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        let lo = if family.is_non_negative() { 0.0 } else { -q - 1.0 };
        let (xs, cdf) = quadrature_cdf(lo, q + 1.0, 2_000_000, |v| log_prior(family, &p, v));
        let (d, pv) = ks_test(&x, |v| interp(&xs, &cdf, v));
        assert!(pv > 0.001, "{family}: D {d}, p {pv}");
    }
}
