mod common;

use common::{ks_test, mean, norm_cdf, truncnorm_cdf, variance};
use decompose::sampler::{
    gamma, sample_truncated_normal, standard_normal, truncated_normal, truncated_standard_normal, TruncationRegion,
};
use decompose::RngHandle;

fn draws(a: f64, b: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = RngHandle::new(seed, 0);
    (0..n)
        .map(|_| truncated_standard_normal(a, b, &mut rng).unwrap())
        .collect()
}

#[test]
fn half_normal_moments() {
    let x = draws(0.0, f64::INFINITY, 1_000_000, 1);
    let m = mean(&x);
    let v = variance(&x);
    let two_over_pi = 2.0 / std::f64::consts::PI;
    assert!((m - two_over_pi.sqrt()).abs() < 0.01, "mean {m}");
    assert!((v / (1.0 - two_over_pi) - 1.0).abs() < 0.02, "var {v}");
}

#[test]
fn ks_across_regions() {
    let regions = [
        (f64::NEG_INFINITY, f64::INFINITY),
        (0.0, f64::INFINITY),
        (8.0, f64::INFINITY),
        (-1.0, 2.0),
        (f64::NEG_INFINITY, -3.0),
        (0.3, 0.5),
        (-6.0, -5.0),
        (2.0, 9.0),
        (-0.2, f64::INFINITY),
    ];
    for (i, &(a, b)) in regions.iter().enumerate() {
        let x = draws(a, b, 100_000, 10 + i as u64);
        let (d, p) = ks_test(&x, |v| truncnorm_cdf(v, a, b));
        assert!(p > 0.01, "[{a}, {b}]: D = {d}, p = {p}");
        assert!(x.iter().all(|&v| v >= a && v <= b));
    }
}

#[test]
fn shifted_and_scaled_region() {
    let (mu, sigma) = (3.0, 0.5);
    let region = TruncationRegion::new(0.0, f64::INFINITY).unwrap();
    let mut rng = RngHandle::new(4, 0);
    let x: Vec<f64> = (0..50_000)
        .map(|_| truncated_normal(mu, sigma, region, &mut rng).unwrap())
        .collect();
    let (a, b) = ((0.0 - mu) / sigma, f64::INFINITY);
    let (_, p) = ks_test(&x, |v| truncnorm_cdf((v - mu) / sigma, a, b));
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn far_tail_is_cheap_and_in_support() {
    let mut rng = RngHandle::new(5, 0);
    let n = 100_000;
    let start = rng.counter();
    let x: Vec<f64> = (0..n)
        .map(|_| truncated_standard_normal(38.0, f64::INFINITY, &mut rng).unwrap())
        .collect();
    // Each attempt consumes at least two words.
    let attempts = (rng.counter() - start) as f64 / 2.0 / n as f64;
    assert!(attempts < 10.0, "{attempts} attempts per draw");
    assert!(x.iter().all(|&v| v >= 38.0 && v.is_finite()));
    // Excess over the bound is approximately Exp(38).
    let excess = mean(&x.iter().map(|v| v - 38.0).collect::<Vec<_>>());
    assert!((excess * 38.0 - 1.0).abs() < 0.02, "{excess}");
}

#[test]
fn vectorised_matches_scalar_calls() {
    let mu = [0.0, 1.0, -2.0, 5.0, 0.3];
    let sigma = [1.0, 0.1, 2.0, 1.0, 3.0];
    let regions = [
        TruncationRegion::new(0.0, f64::INFINITY).unwrap(),
        TruncationRegion::new(-1.0, 1.0).unwrap(),
        TruncationRegion::unbounded(),
        TruncationRegion::new(f64::NEG_INFINITY, 0.0).unwrap(),
        TruncationRegion::new(2.0, 3.0).unwrap(),
    ];
    let mut a = RngHandle::new(9, 3);
    let mut b = a.clone();
    let vec = sample_truncated_normal(&mu, &sigma, &regions, &mut a).unwrap();
    let scalar: Vec<f64> = (0..5)
        .map(|i| truncated_normal(mu[i], sigma[i], regions[i], &mut b).unwrap())
        .collect();
    assert_eq!(vec, scalar);
    assert_eq!(a, b);
}

#[test]
fn streams_are_reproducible_and_distinct() {
    let take = |seed, stream| {
        let mut r = RngHandle::new(seed, stream);
        (0..64).map(|_| r.next_u64()).collect::<Vec<_>>()
    };
    assert_eq!(take(1, 0), take(1, 0));
    assert_ne!(take(1, 0), take(1, 1));
    assert_ne!(take(1, 0), take(2, 0));
}

#[test]
fn standard_normal_ks() {
    let mut rng = RngHandle::new(6, 0);
    let x: Vec<f64> = (0..100_000).map(|_| standard_normal(&mut rng)).collect();
    let (_, p) = ks_test(&x, norm_cdf);
    assert!(p > 0.01);
}

#[test]
fn gamma_moments() {
    let mut rng = RngHandle::new(7, 0);
    for (shape, rate) in [(0.3, 2.0), (1.0, 1.0), (5.5, 0.25)] {
        let x: Vec<f64> = (0..200_000).map(|_| gamma(shape, rate, &mut rng).unwrap()).collect();
        let (m, v) = (mean(&x), variance(&x));
        assert!((m / (shape / rate) - 1.0).abs() < 0.02, "shape {shape}: mean {m}");
        assert!(
            (v / (shape / (rate * rate)) - 1.0).abs() < 0.05,
            "shape {shape}: var {v}"
        );
    }
    assert!(gamma(0.0, 1.0, &mut rng).is_err());
    assert!(gamma(1.0, -1.0, &mut rng).is_err());
}

#[test]
fn empty_regions_are_errors() {
    let mut rng = RngHandle::new(0, 0);
    assert!(truncated_standard_normal(1.0, 1.0, &mut rng).is_err());
    assert!(truncated_standard_normal(2.0, 1.0, &mut rng).is_err());
    assert!(TruncationRegion::new(0.0, 0.0).is_err());
    assert!(truncated_normal(0.0, 0.0, TruncationRegion::unbounded(), &mut rng).is_err());
}
