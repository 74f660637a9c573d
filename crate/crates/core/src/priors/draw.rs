use super::{PriorFamily, PriorSpec};
use crate::error::Result;
use crate::sampler::{gamma, standard_exponential, standard_normal, RngHandle};

fn random_sign(rng: &mut RngHandle) -> f64 {
    if rng.uniform() < 0.5 {
        -1.0
    } else {
        1.0
    }
}

/// `n` independent draws from the prior. The improper uniform families draw
/// from `N(0, 1)` and its absolute value instead.
pub fn draw_prior(spec: &PriorSpec, n: usize, rng: &mut RngHandle) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let x = match spec.family {
            PriorFamily::Uniform => standard_normal(rng),
            PriorFamily::NonNegUniform => standard_normal(rng).abs(),
            PriorFamily::Normal => spec.param(0).sqrt() * standard_normal(rng),
            PriorFamily::HalfNormal => (spec.param(0).sqrt() * standard_normal(rng)).abs(),
            PriorFamily::Laplace => spec.param(0) * standard_exponential(rng) * random_sign(rng),
            PriorFamily::Exponential => spec.param(0) * standard_exponential(rng),
            PriorFamily::StudentT | PriorFamily::HalfT => {
                let (s, nu) = (spec.param(0), spec.param(1));
                let lambda = gamma(nu / 2.0, nu / 2.0, rng)?;
                let x = s * standard_normal(rng) / lambda.sqrt();
                if spec.family == PriorFamily::HalfT {
                    x.abs()
                } else {
                    x
                }
            }
            PriorFamily::Lomax | PriorFamily::DoubleLomax => {
                let (beta, a) = (spec.param(0), spec.param(1));
                // Inverse CDF; the survival function is (1 + u/β)^(-a).
                let x = beta * (rng.uniform_open().powf(-1.0 / a) - 1.0);
                if spec.family == PriorFamily::DoubleLomax {
                    x * random_sign(rng)
                } else {
                    x
                }
            }
        };
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn prior_means() {
        let mut rng = RngHandle::new(11, 0);
        let n = 100_000;
        let e = draw_prior(
            &PriorSpec::new(PriorFamily::Exponential, vec![2.0]).unwrap(),
            n,
            &mut rng,
        )
        .unwrap();
        assert!((mean(&e) / 2.0 - 1.0).abs() < 0.02);
        let h = draw_prior(&PriorSpec::default_for(PriorFamily::HalfNormal), n, &mut rng).unwrap();
        assert!((mean(&h) / (2.0 / std::f64::consts::PI).sqrt() - 1.0).abs() < 0.02);
        let l = draw_prior(
            &PriorSpec::new(PriorFamily::Lomax, vec![1.0, 3.0]).unwrap(),
            n,
            &mut rng,
        )
        .unwrap();
        assert!((mean(&l) / 0.5 - 1.0).abs() < 0.05);
    }

    #[test]
    fn non_negative_families_draw_non_negative() {
        let mut rng = RngHandle::new(1, 0);
        for f in PriorFamily::ALL.into_iter().filter(|f| f.is_non_negative()) {
            let x = draw_prior(&PriorSpec::default_for(f), 10_000, &mut rng).unwrap();
            assert!(x.iter().all(|v| *v >= 0.0), "{f}");
        }
    }
}
