//! Thin adapters between `ndarray` storage and `nalgebra` decompositions.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen, SVD};
use ndarray::{Array1, Array2, ArrayView2};

use crate::error::{Error, Result};

const MAX_ITERS: usize = 10_000;
/// Convergence threshold used by `SVD::new`; plain machine epsilon can stall
/// the bidiagonal sweep on rank-deficient input and return wrong factors.
const SVD_EPS: f64 = 5.0 * f64::EPSILON;

pub fn to_dmatrix(a: ArrayView2<'_, f64>) -> DMatrix<f64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted nonincreasing.
///
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sym_eigen(a: ArrayView2<'_, f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Dimension(format!("expected a square matrix, got {r}x{c}")));
    }
    // symmetrize away round-off asymmetry from accumulated products
    let m = to_dmatrix(a);
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, MAX_ITERS)
        .ok_or_else(|| Error::Numerical("symmetric eigendecomposition did not converge".into()))?;

    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = Array1::from_iter(order.iter().map(|&k| eig.eigenvalues[k]));
    let vectors = Array2::from_shape_fn((r, r), |(i, j)| eig.eigenvectors[(i, order[j])]);
    Ok((values, vectors))
}

/// Thin singular value decomposition `a = u · diag(s) · vt`.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Array2<f64>,
    pub singular_values: Array1<f64>,
    pub vt: Array2<f64>,
}

/// Thin SVD with singular values sorted nonincreasing.
pub fn thin_svd(a: ArrayView2<'_, f64>) -> Result<ThinSvd> {
    let m = to_dmatrix(a);
    let svd = SVD::try_new(m.clone(), true, true, SVD_EPS, MAX_ITERS).ok_or_else(|| {
        Error::Numerical(format!(
            "SVD did not converge (condition estimate {})",
            condition_estimate(&m)
        ))
    })?;
    let (u, vt) = match (svd.u, svd.v_t) {
        (Some(u), Some(vt)) => (u, vt),
        _ => return Err(Error::Numerical("SVD factors were not produced".into())),
    };
    Ok(ThinSvd {
        u: from_dmatrix(&u),
        singular_values: Array1::from_iter(svd.singular_values.iter().copied()),
        vt: from_dmatrix(&vt),
    })
}

/// sqrt of the eigenvalue ratio of `aᵀa`, or infinity when that is singular or fails.
fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let gram = m.transpose() * m;
    match SymmetricEigen::try_new(gram, f64::EPSILON, MAX_ITERS) {
        Some(e) => {
            let max = e.eigenvalues.max();
            let min = e.eigenvalues.min();
            if min > 0.0 {
                (max / min).sqrt()
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    }
}

/// Lower Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky_lower(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Dimension(format!("expected a square matrix, got {r}x{c}")));
    }
    let chol = Cholesky::new(to_dmatrix(a))
        .ok_or_else(|| Error::Numerical("matrix is not symmetric positive definite".into()))?;
    Ok(from_dmatrix(&chol.l()))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(a: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let chol = Cholesky::new(to_dmatrix(a))
        .ok_or_else(|| Error::Numerical("matrix is singular or not positive definite".into()))?;
    Ok(from_dmatrix(&chol.inverse()))
}

pub fn is_symmetric(a: ArrayView2<'_, f64>, tol: f64) -> bool {
    let (r, c) = a.dim();
    r == c && (0..r).all(|i| (0..i).all(|j| (a[[i, j]] - a[[j, i]]).abs() <= tol))
}

pub fn frobenius(a: ArrayView2<'_, f64>) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}
