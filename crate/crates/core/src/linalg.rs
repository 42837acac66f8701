//! Small dense linear-algebra helpers shared by the synthesis and scheduling code.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Symmetric part `(M + Mᵀ)/2`.
pub fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    SymmetricEigen::new(sym(m)).eigenvalues.min()
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn max_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(sym(m)).eigenvalues.max()
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// 2-norm condition number of a symmetric positive definite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(sym(m)).eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Dense inverse with a descriptive error on failure.
pub fn inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} is not square",
            m.nrows(),
            m.ncols()
        )));
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular(what.to_string()))?;
    if inv.iter().all(|x| x.is_finite()) {
        Ok(inv)
    } else {
        Err(Error::Singular(what.to_string()))
    }
}

/// Diagonal matrix from a slice.
pub fn diag(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}

/// Elementwise square root of a diagonal matrix given by its diagonal entries.
pub fn diag_sqrt(values: &[f64]) -> DMatrix<f64> {
    let roots: Vec<f64> = values.iter().map(|v| v.max(0.0).sqrt()).collect();
    diag(&roots)
}
