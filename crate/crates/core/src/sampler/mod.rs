//! Low-level exact samplers driven by a counter-based RNG.

mod gamma;
mod rng;
mod truncnorm;

use rand_distr::{Distribution, Exp1, StandardNormal};

pub use gamma::{gamma, sample_gamma};
pub use rng::{philox4x32, RngHandle};
pub use truncnorm::{
    choose_scheme, sample_truncated_normal, truncated_normal, truncated_standard_normal, uniform_width_threshold,
    Scheme, TruncationRegion, EXP_TAIL_CROSSOVER, MAX_STANDARDIZED_BOUND, UNIFORM_WIDTH_AT_ORIGIN,
};

pub fn standard_normal(rng: &mut RngHandle) -> f64 {
    StandardNormal.sample(rng)
}

pub fn standard_exponential(rng: &mut RngHandle) -> f64 {
    Exp1.sample(rng)
}
