//! Small dense kernels used by the projection builder.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::sampler::{standard_normal, RngHandle};

/// Norm, relative to the largest input column, below which a Gram-Schmidt
/// column is treated as dependent.
const RANK_TOL: f64 = 1e-10;

/// Orthonormalises the columns of `a` in place by modified Gram-Schmidt with
/// one re-orthogonalisation pass.
///
/// Columns that are numerically dependent on earlier ones are replaced by
/// Gaussian vectors (drawn from `rng`) and orthonormalised in turn. Returns
/// the number of replaced columns. Requires `a.ncols() <= a.nrows()`.
pub fn orthonormalize(a: &mut Array2<f64>, rng: &mut RngHandle) -> usize {
    let (rows, cols) = a.dim();
    assert!(cols <= rows, "cannot orthonormalise {cols} columns in dimension {rows}");
    let largest = (0..cols)
        .map(|j| a.column(j).dot(&a.column(j)).sqrt())
        .fold(0.0, f64::max);
    let mut replaced = 0;
    for j in 0..cols {
        let mut fresh = true;
        loop {
            let original = a.column(j).dot(&a.column(j)).sqrt();
            for _ in 0..2 {
                for i in 0..j {
                    let proj = a.column(i).dot(&a.column(j));
                    let qi = a.column(i).to_owned();
                    a.column_mut(j).scaled_add(-proj, &qi);
                }
            }
            let norm = a.column(j).dot(&a.column(j)).sqrt();
            let reference = if fresh { original.max(largest) } else { original };
            if norm > RANK_TOL * reference && norm > 0.0 {
                a.column_mut(j).mapv_inplace(|v| v / norm);
                break;
            }
            if fresh {
                replaced += 1;
                fresh = false;
            }
            for v in a.column_mut(j).iter_mut() {
                *v = standard_normal(rng);
            }
        }
    }
    replaced
}

/// Maximum absolute deviation of `QᵀQ` from the identity.
pub fn orthonormality_error(q: ArrayView2<'_, f64>) -> f64 {
    let g = q.t().dot(&q);
    g.indexed_iter()
        .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns.
pub fn symmetric_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    let mut m = a.to_owned();
    let mut vecs = Array2::<f64>::eye(n);
    let total: f64 = m.iter().map(|v| v * v).sum();
    for _sweep in 0..100 {
        let off: f64 = m.indexed_iter().filter(|((i, j), _)| i != j).map(|(_, v)| v * v).sum();
        if off <= 1e-30 * total || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = vecs[[k, p]];
                    let vkq = vecs[[k, q]];
                    vecs[[k, p]] = c * vkp - s * vkq;
                    vecs[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = vecs.select(Axis(1), &order);
    (values, vectors)
}
