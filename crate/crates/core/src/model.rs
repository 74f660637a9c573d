//! Data, factors and the joint probability of the model.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::priors::{in_support, log_density_at, PriorSpec};
use crate::sampler::RngHandle;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// A dense, finite M×N observation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
}

impl DataMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::Shape(format!(
                "data matrix must be at least 1x1, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("data matrix"));
        }
        // Row-major storage keeps file I/O a straight copy.
        let values = if values.is_standard_layout() {
            values
        } else {
            values.as_standard_layout().into_owned()
        };
        Ok(Self { values })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        let values = Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| Error::Shape(format!("{rows}x{cols} matrix: {e}")))?;
        Self::new(values)
    }

    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn as_slice(&self) -> &[f64] {
        self.values.as_slice().expect("standard layout")
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }

    /// `‖X‖²_F`.
    pub fn frobenius_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }
}

/// Which factor a bank holds: `U` is indexed by rows of X, `V` by columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    U,
    V,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::U => Side::V,
            Side::V => Side::U,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::U => "U",
            Side::V => "V",
        })
    }
}

/// One factor matrix (dim×K) with a prior per column.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBank {
    side: Side,
    columns: Array2<f64>,
    priors: Vec<PriorSpec>,
}

impl FactorBank {
    /// Checks `1 ≤ K ≤ dim`, one valid prior per column and that every
    /// column lies in its prior's support.
    pub fn new(side: Side, columns: Array2<f64>, priors: Vec<PriorSpec>) -> Result<Self> {
        let (dim, k) = columns.dim();
        if k == 0 || k > dim {
            return Err(Error::Shape(format!(
                "factor bank needs 1 <= K <= dim, got K={k}, dim={dim}"
            )));
        }
        if priors.len() != k {
            return Err(Error::Shape(format!("{k} columns but {} priors", priors.len())));
        }
        for p in &priors {
            p.validate()?;
        }
        let bank = Self { side, columns, priors };
        bank.check_support()?;
        Ok(bank)
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn k(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> ArrayView2<'_, f64> {
        self.columns.view()
    }

    pub fn column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.columns.column(k)
    }

    pub fn prior(&self, k: usize) -> &PriorSpec {
        &self.priors[k]
    }

    pub fn priors(&self) -> &[PriorSpec] {
        &self.priors
    }

    pub fn set_prior(&mut self, k: usize, spec: PriorSpec) -> Result<()> {
        spec.validate()?;
        if spec.family != self.priors[k].family {
            return Err(Error::Config(format!(
                "column {k} has family {}, cannot switch to {}",
                self.priors[k].family, spec.family
            )));
        }
        self.priors[k] = spec;
        Ok(())
    }

    pub(crate) fn set_params(&mut self, k: usize, params: Vec<f64>) {
        self.priors[k].params = params;
    }

    /// Replaces column `k`; values must be finite and in the prior's support.
    pub fn set_column(&mut self, k: usize, values: &[f64]) -> Result<()> {
        if values.len() != self.dim() {
            return Err(Error::Shape(format!(
                "column of length {} for dim {}",
                values.len(),
                self.dim()
            )));
        }
        let family = self.priors[k].family;
        if let Some((row, &value)) = values.iter().enumerate().find(|(_, v)| !in_support(family, **v)) {
            return Err(Error::SupportViolation {
                side: self.side,
                row,
                column: k,
                value,
            });
        }
        self.columns.column_mut(k).assign(&ArrayView1::from(values));
        Ok(())
    }

    pub(crate) fn columns_mut(&mut self) -> &mut Array2<f64> {
        &mut self.columns
    }

    pub(crate) fn check_support(&self) -> Result<()> {
        for (k, prior) in self.priors.iter().enumerate() {
            for (row, &value) in self.columns.column(k).iter().enumerate() {
                if !in_support(prior.family, value) {
                    return Err(Error::SupportViolation {
                        side: self.side,
                        row,
                        column: k,
                        value,
                    });
                }
            }
        }
        Ok(())
    }

    /// `Σ log f(u | θ)` over column `k`.
    pub(crate) fn column_log_prior(&self, k: usize) -> Result<f64> {
        let prior = &self.priors[k];
        let mut total = 0.0;
        for (row, &value) in self.columns.column(k).iter().enumerate() {
            let l = log_density_at(prior, value);
            if l == f64::NEG_INFINITY {
                return Err(Error::SupportViolation {
                    side: self.side,
                    row,
                    column: k,
                    value,
                });
            }
            total += l;
        }
        Ok(total)
    }
}

/// Both factor banks, the noise precision and the sampler state of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub u: FactorBank,
    pub v: FactorBank,
    pub alpha: f64,
    pub rng: RngHandle,
    pub iteration: usize,
    /// Single-sample estimate of `E[log p(X, Z | Θ)]` at the latest sample.
    pub monitor: f64,
}

impl ModelState {
    pub fn new(u: FactorBank, v: FactorBank, alpha: f64, rng: RngHandle) -> Result<Self> {
        let state = Self {
            u,
            v,
            alpha,
            rng,
            iteration: 0,
            monitor: f64::NAN,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.u.k() != self.v.k() {
            return Err(Error::Shape(format!(
                "U has {} sources, V has {}",
                self.u.k(),
                self.v.k()
            )));
        }
        if self.u.side() != Side::U || self.v.side() != Side::V {
            return Err(Error::Shape("factor banks are swapped".into()));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.u.k()
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng.seed()
    }

    pub fn bank(&self, side: Side) -> &FactorBank {
        match side {
            Side::U => &self.u,
            Side::V => &self.v,
        }
    }

    pub fn bank_mut(&mut self, side: Side) -> &mut FactorBank {
        match side {
            Side::U => &mut self.u,
            Side::V => &mut self.v,
        }
    }

    /// The K rank-1 sources, ordered by index, with their share of `‖X‖²_F`.
    pub fn sources(&self, x: &DataMatrix) -> Vec<Source> {
        let total = x.frobenius_sq();
        (0..self.k())
            .map(|k| {
                let spatial = self.u.column(k).to_vec();
                let temporal = self.v.column(k).to_vec();
                let energy = sq_norm(&spatial) * sq_norm(&temporal);
                Source {
                    index: k,
                    spatial,
                    temporal,
                    variance_explained: if total > 0.0 { energy / total } else { 0.0 },
                }
            })
            .collect()
    }
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// A rank-1 component `U_k V_kᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub index: usize,
    pub spatial: Vec<f64>,
    pub temporal: Vec<f64>,
    pub variance_explained: f64,
}

impl Source {
    pub fn matrix(&self) -> Array2<f64> {
        let u = Array1::from(self.spatial.clone()).insert_axis(Axis(1));
        let v = Array1::from(self.temporal.clone()).insert_axis(Axis(0));
        u.dot(&v)
    }
}

fn check_banks(u: &FactorBank, v: &FactorBank) -> Result<()> {
    if u.k() != v.k() {
        return Err(Error::Shape(format!("U has {} sources, V has {}", u.k(), v.k())));
    }
    Ok(())
}

/// `X̂ = U Vᵀ`.
pub fn reconstruct(u: &FactorBank, v: &FactorBank) -> Result<DataMatrix> {
    check_banks(u, v)?;
    DataMatrix::new(u.columns().dot(&v.columns().t()))
}

/// `X − U Vᵀ`, or `X − U₋ₖ V₋ₖᵀ` when `exclude` is `Some(k)`.
pub fn residual(x: &DataMatrix, u: &FactorBank, v: &FactorBank, exclude: Option<usize>) -> Result<DataMatrix> {
    check_banks(u, v)?;
    if u.dim() != x.rows() || v.dim() != x.cols() {
        return Err(Error::Shape(format!(
            "factors {}x{} do not match data {}x{}",
            u.dim(),
            v.dim(),
            x.rows(),
            x.cols()
        )));
    }
    if let Some(k) = exclude {
        if k >= u.k() {
            return Err(Error::Shape(format!("source {k} out of range for K={}", u.k())));
        }
    }
    let mut r = x.view().to_owned();
    for k in (0..u.k()).filter(|k| Some(*k) != exclude) {
        let uk = u.column(k);
        let vk = v.column(k);
        for (mut row, &um) in r.rows_mut().into_iter().zip(uk.iter()) {
            row.scaled_add(-um, &vk);
        }
    }
    DataMatrix::new(r)
}

pub(crate) fn residual_sq(x: &DataMatrix, u: &FactorBank, v: &FactorBank) -> Result<f64> {
    Ok(residual(x, u, v, None)?.frobenius_sq())
}

/// Negative log joint density of data and factors given `α` and `θ`, with a
/// flat hyperprior.
///
/// A factor value outside its prior's support is an error rather than `+∞`.
pub fn neg_log_joint(x: &DataMatrix, state: &ModelState) -> Result<f64> {
    state.validate()?;
    let r2 = residual_sq(x, &state.u, &state.v)?;
    neg_log_joint_from_residual(r2, x.rows() * x.cols(), state)
}

pub(crate) fn neg_log_joint_from_residual(r2: f64, mn: usize, state: &ModelState) -> Result<f64> {
    let alpha = state.alpha;
    let mut total = 0.5 * alpha * r2 - 0.5 * mn as f64 * (alpha.ln() - LN_2PI);
    for bank in [&state.u, &state.v] {
        for k in 0..bank.k() {
            total -= bank.column_log_prior(k)?;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::priors::PriorFamily;
    use ndarray::array;

    fn bank(side: Side, columns: Array2<f64>, family: PriorFamily) -> FactorBank {
        let k = columns.ncols();
        FactorBank::new(side, columns, vec![PriorSpec::default_for(family); k]).unwrap()
    }

    #[test]
    fn data_matrix_validation() {
        assert!(DataMatrix::new(Array2::zeros((0, 3))).is_err());
        assert!(DataMatrix::new(array![[1.0, f64::INFINITY]]).is_err());
        let x = DataMatrix::new(array![[1.0, 2.0], [3.0, 4.0]].reversed_axes()).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn factor_bank_validation() {
        assert!(FactorBank::new(
            Side::U,
            Array2::zeros((2, 3)),
            vec![PriorSpec::default_for(PriorFamily::Uniform); 3]
        )
        .is_err());
        assert!(FactorBank::new(
            Side::U,
            Array2::zeros((3, 2)),
            vec![PriorSpec::default_for(PriorFamily::Uniform)]
        )
        .is_err());
        let neg = FactorBank::new(
            Side::V,
            array![[-1.0], [0.0]],
            vec![PriorSpec::default_for(PriorFamily::Exponential)],
        );
        assert!(matches!(
            neg,
            Err(Error::SupportViolation {
                side: Side::V,
                row: 0,
                ..
            })
        ));
    }

    #[test]
    fn reconstruct_outer_product() {
        let u = bank(Side::U, array![[1.0], [0.0]], PriorFamily::Uniform);
        let v = bank(Side::V, array![[2.0], [3.0]], PriorFamily::Uniform);
        assert_eq!(
            reconstruct(&u, &v).unwrap().into_inner(),
            array![[2.0, 3.0], [0.0, 0.0]]
        );
    }

    #[test]
    fn residual_with_single_source_excluded_is_data() {
        let x = DataMatrix::new(array![[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let u = bank(Side::U, array![[1.0], [5.0]], PriorFamily::Uniform);
        let v = bank(Side::V, array![[2.0], [3.0]], PriorFamily::Uniform);
        assert_eq!(residual(&x, &u, &v, Some(0)).unwrap(), x);
        assert!(residual(&x, &u, &v, Some(1)).is_err());
    }

    #[test]
    fn neg_log_joint_alpha_dependence() {
        let u = bank(Side::U, array![[1.0], [2.0]], PriorFamily::Uniform);
        let v = bank(Side::V, array![[1.0], [1.0], [0.5]], PriorFamily::Uniform);
        let x = reconstruct(&u, &v).unwrap();
        let mut state = ModelState::new(u, v, 1.0, RngHandle::new(0, 0)).unwrap();
        let a = neg_log_joint(&x, &state).unwrap();
        assert!((a + 3.0 * (1.0 / (2.0 * std::f64::consts::PI)).ln()).abs() < 1e-12);
        state.alpha = 2.0;
        let b = neg_log_joint(&x, &state).unwrap();
        assert!((b - a + 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn source_matrix_is_outer_product() {
        let s = Source {
            index: 0,
            spatial: vec![1.0, 2.0],
            temporal: vec![3.0, 4.0, 5.0],
            variance_explained: 0.0,
        };
        assert_eq!(s.matrix(), array![[3.0, 4.0, 5.0], [6.0, 8.0, 10.0]]);
    }
}
