use rand_distr::{Distribution, Gamma};

use super::RngHandle;
use crate::error::{Error, Result};

/// One draw from `Gamma(shape, rate)` (shape-rate convention).
pub fn gamma(shape: f64, rate: f64, rng: &mut RngHandle) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite() && rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "gamma needs positive finite shape and rate, got ({shape}, {rate})"
        )));
    }
    let dist =
        Gamma::new(shape, 1.0 / rate).map_err(|e| Error::InvalidParams(format!("gamma({shape}, {rate}): {e}")))?;
    Ok(dist.sample(rng))
}

/// Vectorised gamma draws; `shape` and `rate` broadcast when of length 1.
pub fn sample_gamma(shape: &[f64], rate: &[f64], rng: &mut RngHandle) -> Result<Vec<f64>> {
    let n = shape.len().max(rate.len());
    for (name, len) in [("shape", shape.len()), ("rate", rate.len())] {
        if len != 1 && len != n {
            return Err(Error::Shape(format!("{name} has length {len}, expected 1 or {n}")));
        }
    }
    let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
    (0..n).map(|i| gamma(pick(shape, i), pick(rate, i), rng)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn exponential_special_case() {
        let mut rng = RngHandle::new(1, 0);
        let xs = sample_gamma(&vec![1.0; 100_000], &[2.0], &mut rng).unwrap();
        let (m, _) = mean_var(&xs);
        assert!((m / 0.5 - 1.0).abs() < 0.02);
    }

    #[test]
    fn shape_three_moments() {
        let mut rng = RngHandle::new(2, 0);
        let xs = sample_gamma(&[3.0], &vec![1.0; 100_000], &mut rng).unwrap();
        let (m, v) = mean_var(&xs);
        assert!((m / 3.0 - 1.0).abs() < 0.02);
        assert!((v / 3.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = RngHandle::new(0, 0);
        assert!(gamma(0.0, 1.0, &mut rng).is_err());
        assert!(gamma(1.0, -1.0, &mut rng).is_err());
        assert!(sample_gamma(&[1.0, 2.0], &[1.0, 2.0, 3.0], &mut rng).is_err());
    }
}
