//! Dense helpers over `nalgebra` used by the oracle and bounds paths.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::operator::{CMatrix, C64};

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and the
/// matching eigenvectors as columns.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), found: m.ncols() });
    }
    let herm = (m + m.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = m.nrows();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    Ok((values, vectors))
}

pub fn eigvalsh(m: &CMatrix) -> Result<Vec<f64>> {
    Ok(eigh(m)?.0)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// `exp(factor * H)` for Hermitian `H`, through its eigenbasis.
pub fn expm_hermitian(h: &CMatrix, factor: C64) -> Result<CMatrix> {
    let (vals, vecs) = eigh(h)?;
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&l| (factor * l).exp()));
    Ok(&vecs * DMatrix::from_diagonal(&d) * vecs.adjoint())
}

/// Unitary factor of the polar decomposition `M = W P`.
pub fn polar_unitary(m: &CMatrix) -> Result<CMatrix> {
    let svd = m.clone().svd(true, true);
    match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => Ok(u * v_t),
        _ => Err(Error::InvalidArgument("SVD failed to produce singular vectors".into())),
    }
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).iter().all(|x| x.norm() <= tol)
}

pub fn to_column(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}
