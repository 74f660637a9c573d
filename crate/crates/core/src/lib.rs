//! Probabilistic blind source separation.
//!
//! A data matrix `X` (M×N) is factorised into `U Vᵀ` where every column of
//! `U` and `V` carries its own prior. Noise precision and all prior
//! hyperparameters are inferred jointly with the factors: an EM phase
//! alternates maximum-likelihood hyperparameter updates with blocked Gibbs
//! sweeps over the factor columns, and a block coordinate descent phase then
//! moves every column to the mode of its conditional posterior.
//!
//! The conditional posterior of a column is a Gaussian likelihood times the
//! column prior. Its parameters are computed from the cached products
//! `A = X V` and `B = VᵀV`, so residual matrices are never formed. An optional
//! random-projection path ([`lowrank`]) performs the same computation in a
//! reduced space.

pub mod datagen;
pub mod engine;
mod error;
pub mod linalg;
pub mod lowrank;
pub mod model;
pub mod priors;
pub mod sampler;

pub use error::{Error, Result};
pub use model::{neg_log_joint, reconstruct, residual, DataMatrix, FactorBank, ModelState, Side, Source};
pub use priors::{GaussianLikelihood, PriorFamily, PriorSpec};
pub use sampler::RngHandle;
