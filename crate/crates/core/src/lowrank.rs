//! Random-projection fast path.
//!
//! Orthonormal bases `Q_U` (M×m_r) and `Q_V` (N×n_r) are built once from the
//! data by a randomized range finder. Column updates then work with the
//! reduced matrices `X_R = Q_Uᵀ X Q_V`, `U_R = Q_Uᵀ U` and `V_R = Q_Vᵀ V`, and
//! only the conditional mean is lifted back to full space, where the prior
//! is applied. After construction nothing here reads `X`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::engine::conditional_mean;
use crate::error::{Error, Result};
use crate::linalg::{orthonormalize, symmetric_eigen};
use crate::model::{DataMatrix, ModelState, Side};
use crate::priors::GaussianLikelihood;
use crate::sampler::{standard_normal, RngHandle};

pub const DEFAULT_OVERSAMPLE: usize = 10;
pub const POWER_ITERATIONS: usize = 1;

/// Requested projection ranks. `n_r = None` leaves the column axis
/// unreduced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowRankConfig {
    pub m_r: usize,
    #[serde(default)]
    pub n_r: Option<usize>,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_oversample() -> usize {
    DEFAULT_OVERSAMPLE
}

impl LowRankConfig {
    pub fn new(m_r: usize, n_r: Option<usize>) -> Self {
        Self {
            m_r,
            n_r,
            oversample: DEFAULT_OVERSAMPLE,
        }
    }

    /// `(m_r, n_r)` for an M×N matrix.
    pub fn ranks(&self, n: usize) -> (usize, usize) {
        (self.m_r, self.n_r.unwrap_or(n))
    }
}

/// An orthonormal basis of a subspace of `ℝ^dim`. The identity is kept
/// implicit so that an unreduced axis costs nothing.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    Identity(usize),
    Dense(Array2<f64>),
}

impl Basis {
    pub fn dim(&self) -> usize {
        match self {
            Basis::Identity(n) => *n,
            Basis::Dense(q) => q.nrows(),
        }
    }

    pub fn rank(&self) -> usize {
        match self {
            Basis::Identity(n) => *n,
            Basis::Dense(q) => q.ncols(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Basis::Identity(_))
    }

    pub fn to_dense(&self) -> Array2<f64> {
        match self {
            Basis::Identity(n) => Array2::eye(*n),
            Basis::Dense(q) => q.clone(),
        }
    }

    /// `Qᵀ a`.
    pub fn project(&self, a: ArrayView2<'_, f64>) -> Array2<f64> {
        match self {
            Basis::Identity(_) => a.to_owned(),
            Basis::Dense(q) => q.t().dot(&a),
        }
    }

    pub fn project_vec(&self, a: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            Basis::Identity(_) => a.to_owned(),
            Basis::Dense(q) => q.t().dot(&a),
        }
    }

    /// `Q m`.
    pub fn lift(&self, m: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            Basis::Identity(_) => m.to_owned(),
            Basis::Dense(q) => q.dot(&m),
        }
    }
}

/// The two bases and the reduced data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionPair {
    q_u: Basis,
    q_v: Basis,
    x_reduced: Array2<f64>,
    x_norm_sq: f64,
    x_reduced_norm_sq: f64,
    deficit_u: usize,
    deficit_v: usize,
}

impl ProjectionPair {
    pub fn q_u(&self) -> &Basis {
        &self.q_u
    }

    pub fn q_v(&self) -> &Basis {
        &self.q_v
    }

    pub fn basis(&self, side: Side) -> &Basis {
        match side {
            Side::U => &self.q_u,
            Side::V => &self.q_v,
        }
    }

    pub fn x_reduced(&self) -> ArrayView2<'_, f64> {
        self.x_reduced.view()
    }

    /// Both axes unreduced.
    pub fn is_identity(&self) -> bool {
        self.q_u.is_identity() && self.q_v.is_identity()
    }

    pub fn m_r(&self) -> usize {
        self.q_u.rank()
    }

    pub fn n_r(&self) -> usize {
        self.q_v.rank()
    }

    /// `‖X‖²_F`, recorded at construction.
    pub fn x_norm_sq(&self) -> f64 {
        self.x_norm_sq
    }

    pub fn x_reduced_norm_sq(&self) -> f64 {
        self.x_reduced_norm_sq
    }

    /// Number of basis columns of `side` that are random completions rather
    /// than directions in the range of the data.
    pub fn rank_deficit(&self, side: Side) -> usize {
        match side {
            Side::U => self.deficit_u,
            Side::V => self.deficit_v,
        }
    }
}

/// Range finder for the column space of `a` (rows×cols): returns a basis
/// of rank `rank` and the number of random completions it contains.
fn range_basis(a: ArrayView2<'_, f64>, rank: usize, oversample: usize, rng: &mut RngHandle) -> (Basis, usize) {
    let (rows, cols) = a.dim();
    if rank == rows {
        return (Basis::Identity(rows), 0);
    }
    let width = (rank + oversample).min(rows);
    let omega = Array2::from_shape_fn((cols, width), |_| standard_normal(rng));
    let mut y = a.dot(&omega);
    if width <= cols {
        for _ in 0..POWER_ITERATIONS {
            orthonormalize(&mut y, rng);
            let mut z = a.t().dot(&y);
            orthonormalize(&mut z, rng);
            y = a.dot(&z);
        }
    }
    let replaced = orthonormalize(&mut y, rng);
    // Rotate onto the principal directions of the sketch so that truncation
    // keeps the dominant subspace.
    let b = y.t().dot(&a);
    let (_, w) = symmetric_eigen(b.dot(&b.t()).view());
    let q = y.dot(&w).slice(s![.., ..rank]).to_owned();
    let deficit = rank.saturating_sub(width - replaced);
    (Basis::Dense(q), deficit)
}

/// Builds `Q_U` (rank `m_r`) and `Q_V` (rank `n_r`) for `x`. A rank equal to
/// the full dimension gives the identity basis on that axis.
pub fn build_projection(
    x: &DataMatrix,
    m_r: usize,
    n_r: usize,
    oversample: usize,
    rng: &mut RngHandle,
) -> Result<ProjectionPair> {
    let (m, n) = (x.rows(), x.cols());
    if m_r == 0 || m_r > m || n_r == 0 || n_r > n {
        return Err(Error::Config(format!(
            "projection ranks ({m_r}, {n_r}) must lie in [1, {m}] x [1, {n}]"
        )));
    }
    let (q_u, deficit_u) = range_basis(x.view(), m_r, oversample, rng);
    let (q_v, deficit_v) = range_basis(x.view().t(), n_r, oversample, rng);
    let left = q_u.project(x.view());
    let x_reduced = q_v.project(left.t()).reversed_axes();
    let x_reduced = x_reduced.as_standard_layout().into_owned();
    let x_reduced_norm_sq = x_reduced.iter().map(|v| v * v).sum();
    Ok(ProjectionPair {
        q_u,
        q_v,
        x_reduced,
        x_norm_sq: x.frobenius_sq(),
        x_reduced_norm_sq,
        deficit_u,
        deficit_v,
    })
}

/// Reduced factors and the reduced update products for one side.
///
/// For a `U` update `a_reduced = X_R V_R` and `b_reduced = V_Rᵀ V_R`; for a
/// `V` update `a_reduced = X_Rᵀ U_R` and `b_reduced = U_Rᵀ U_R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCache {
    pub side: Side,
    pub u_reduced: Array2<f64>,
    pub v_reduced: Array2<f64>,
    pub a_reduced: Array2<f64>,
    pub b_reduced: Array2<f64>,
}

impl ReducedCache {
    pub fn build(pp: &ProjectionPair, state: &ModelState, side: Side) -> Self {
        let u_reduced = pp.q_u.project(state.u.columns());
        let v_reduced = pp.q_v.project(state.v.columns());
        let (a_reduced, b_reduced) = match side {
            Side::U => (pp.x_reduced.dot(&v_reduced), v_reduced.t().dot(&v_reduced)),
            Side::V => (pp.x_reduced.t().dot(&u_reduced), u_reduced.t().dot(&u_reduced)),
        };
        Self {
            side,
            u_reduced,
            v_reduced,
            a_reduced,
            b_reduced,
        }
    }

    /// The reduced factor being updated.
    pub fn own(&self) -> &Array2<f64> {
        match self.side {
            Side::U => &self.u_reduced,
            Side::V => &self.v_reduced,
        }
    }

    /// Re-projects column `k` of the factor being updated after it changed.
    pub fn column_updated(&mut self, pp: &ProjectionPair, k: usize, column: ArrayView1<'_, f64>) {
        let projected = pp.basis(self.side).project_vec(column);
        let own = match self.side {
            Side::U => &mut self.u_reduced,
            Side::V => &mut self.v_reduced,
        };
        own.column_mut(k).assign(&projected);
    }
}

/// Conditional-posterior likelihood of column `k` from the reduced cache,
/// lifted to full space.
pub fn likelihood_params_reduced(
    pp: &ProjectionPair,
    rc: &ReducedCache,
    alpha: f64,
    k: usize,
    dead_source_threshold: f64,
) -> Result<GaussianLikelihood> {
    let b_kk = rc.b_reduced[[k, k]];
    if !(b_kk > dead_source_threshold) {
        return Err(Error::DeadSource { column: k, b_kk });
    }
    let m = conditional_mean(rc.a_reduced.column(k), rc.own().view(), rc.b_reduced.view(), k);
    let mu = pp.basis(rc.side).lift(m.view());
    GaussianLikelihood::new(mu.to_vec(), 1.0 / (alpha * b_kk).sqrt())
}

/// Residual energy under the reduction: the in-subspace residual plus all
/// data energy outside the subspace.
pub fn reduced_residual_sq(pp: &ProjectionPair, state: &ModelState) -> f64 {
    let u_r = pp.q_u.project(state.u.columns());
    let v_r = pp.q_v.project(state.v.columns());
    let fit = u_r.dot(&v_r.t());
    let inside: f64 = pp.x_reduced.iter().zip(fit.iter()).map(|(a, b)| (a - b).powi(2)).sum();
    inside + (pp.x_norm_sq - pp.x_reduced_norm_sq).max(0.0)
}

/// Terms of the per-iteration cost model. Counts are multiply-adds times
/// two; they describe this implementation, not any published model.
pub mod cost {
    /// Iterations over which the one-time projection cost is spread.
    pub const AMORTISATION_ITERS: f64 = 200.0;
    /// Jacobi sweeps charged for the sketch eigen-decomposition.
    pub const JACOBI_SWEEPS: f64 = 8.0;
    /// Flops per element of one Jacobi sweep over an ℓ×ℓ matrix.
    pub const JACOBI_FLOPS_PER_ENTRY: f64 = 6.0;
}

/// One factor sweep: `A` (2·dim·other·K), `B` (2·other·K²), then K column
/// updates of 2·dim·K flops plus 4·dim for the scaling terms.
fn sweep_flops(k: f64, dim_r: f64, other_r: f64) -> f64 {
    2.0 * dim_r * other_r * k + 2.0 * other_r * k * k + 2.0 * dim_r * k * k + 4.0 * dim_r * k
}

fn range_finder_flops(rows: f64, cols: f64, rank: f64, oversample: f64) -> f64 {
    let l = (rank + oversample).min(rows);
    let sketches = 2.0 * rows * cols * l * (1.0 + 2.0 * POWER_ITERATIONS as f64);
    let gram_schmidt = 4.0 * rows * l * l * (1.0 + POWER_ITERATIONS as f64) + 4.0 * cols * l * l;
    let rotation = 2.0 * rows * cols * l + 2.0 * cols * l * l + 2.0 * rows * l * l;
    let eigen = cost::JACOBI_SWEEPS * cost::JACOBI_FLOPS_PER_ENTRY * l * l * l;
    sketches + gram_schmidt + rotation + eigen
}

/// Estimated flops of one EM iteration (one `U` sweep and one `V` sweep).
///
/// With `reduced` set, the update products run at ranks `m_r`, `n_r`; every
/// reduced axis adds the lift of `K` means (`2·dim·rank·K`) and its share of
/// the one-time projection cost. An axis whose rank equals its dimension is
/// not reduced and costs the same as in the full path.
pub fn estimate_flops(m: usize, n: usize, k: usize, m_r: usize, n_r: usize, reduced: bool) -> f64 {
    let (mf, nf, kf) = (m as f64, n as f64, k as f64);
    if !reduced {
        return sweep_flops(kf, mf, nf) + sweep_flops(kf, nf, mf);
    }
    let (mr, nr) = (m_r.min(m) as f64, n_r.min(n) as f64);
    let mut total = sweep_flops(kf, mr, nr) + sweep_flops(kf, nr, mr);
    let os = DEFAULT_OVERSAMPLE as f64;
    let mut one_time = 0.0;
    if m_r < m {
        total += 2.0 * mf * mr * kf;
        one_time += range_finder_flops(mf, nf, mr, os);
    }
    if n_r < n {
        total += 2.0 * nf * nr * kf;
        one_time += range_finder_flops(nf, mf, nr, os);
    }
    if one_time > 0.0 {
        one_time += 2.0 * mr * mf * nf + 2.0 * mr * nf * nr;
    }
    total + one_time / cost::AMORTISATION_ITERS
}

/// `1 − reduced / full` flops per iteration.
pub fn flop_reduction(m: usize, n: usize, k: usize, m_r: usize, n_r: usize) -> f64 {
    1.0 - estimate_flops(m, n, k, m_r, n_r, true) / estimate_flops(m, n, k, m_r, n_r, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::orthonormality_error;

    fn random_matrix(rows: usize, cols: usize, rng: &mut RngHandle) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| standard_normal(rng))
    }

    #[test]
    fn full_rank_is_identity() {
        let mut rng = RngHandle::new(0, 1);
        let x = DataMatrix::new(random_matrix(6, 4, &mut rng)).unwrap();
        let pp = build_projection(&x, 6, 4, 10, &mut rng).unwrap();
        assert!(pp.q_u().is_identity() && pp.q_v().is_identity());
        assert_eq!(pp.x_reduced(), x.view());
    }

    #[test]
    fn exact_rank_is_captured() {
        let mut rng = RngHandle::new(5, 1);
        let x = random_matrix(40, 3, &mut rng).dot(&random_matrix(3, 30, &mut rng));
        let x = DataMatrix::new(x).unwrap();
        let pp = build_projection(&x, 5, 5, 10, &mut rng).unwrap();
        let qu = pp.q_u().to_dense();
        let qv = pp.q_v().to_dense();
        assert!(orthonormality_error(qu.view()) < 1e-10);
        assert!(orthonormality_error(qv.view()) < 1e-10);
        assert_eq!(pp.rank_deficit(Side::U), 2);
        let back = qu.dot(&pp.x_reduced()).dot(&qv.t());
        let err: f64 = back.iter().zip(x.view().iter()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((err / x.frobenius_sq()).sqrt() < 1e-8);
    }

    #[test]
    fn bad_ranks_rejected() {
        let mut rng = RngHandle::new(0, 1);
        let x = DataMatrix::new(Array2::ones((4, 3))).unwrap();
        assert!(build_projection(&x, 5, 2, 10, &mut rng).is_err());
        assert!(build_projection(&x, 0, 2, 10, &mut rng).is_err());
    }

    #[test]
    fn no_reduction_saves_nothing() {
        let full = estimate_flops(300, 200, 5, 300, 200, false);
        let red = estimate_flops(300, 200, 5, 300, 200, true);
        assert!(red >= full);
        assert!(flop_reduction(300, 200, 5, 300, 200) <= 0.0);
    }

    #[test]
    fn overhead_can_dominate() {
        assert!(flop_reduction(16384, 500, 1, 16000, 500) < 0.0);
    }

    #[test]
    fn full_cost_formula() {
        let (m, n, k) = (7.0, 5.0, 3.0);
        let expect = 2.0 * (2.0 * m * n * k) + 2.0 * (2.0 * m * k * k + 2.0 * n * k * k) + 4.0 * m * k + 4.0 * n * k;
        assert_eq!(estimate_flops(7, 5, 3, 7, 5, false), expect);
    }
}
