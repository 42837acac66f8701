//! Continuous-time LQR gain from the algebraic Riccati equation, computed through the matrix
//! sign function of the Hamiltonian. Used as an independent oracle for the LMI synthesis.

use nalgebra::DMatrix;

use crate::linalg::{inverse, spectral_abscissa};
use crate::{Error, Result};

/// Stabilising solution `X` of `AᵀX + XA − XBR⁻¹BᵀX + Q = 0`.
pub fn care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let m = b.ncols();
    if !a.is_square() || b.nrows() != n || q.shape() != (n, n) || r.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "CARE: A {:?}, B {:?}, Q {:?}, R {:?}",
            a.shape(),
            b.shape(),
            q.shape(),
            r.shape()
        )));
    }
    let s = b * inverse(r, "R")? * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&s));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign = matrix_sign(h)?;
    let w11 = sign.view((0, 0), (n, n));
    let w12 = sign.view((0, n), (n, n));
    let w21 = sign.view((n, 0), (n, n));
    let w22 = sign.view((n, n), (n, n));

    // (W + I)[I; X] = 0  ⇒  [W12; W22 + I] X = −[W11 + I; W21]
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&w12);
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(w22 + DMatrix::<f64>::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(w11 + DMatrix::<f64>::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-w21));

    let svd = lhs.svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::NotStabilizable(format!("stable subspace extraction failed: {e}")))?;
    let x = (&x + x.transpose()) * 0.5;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotStabilizable("non-finite Riccati solution".into()));
    }
    Ok(x)
}

/// Newton iteration with determinant scaling for `sign(H)`.
fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = z.nrows() as f64;
    for _ in 0..100 {
        let lu = z.clone().lu();
        let det = lu.determinant();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NotStabilizable(
                "Hamiltonian has eigenvalues on the imaginary axis".into(),
            ));
        }
        let zinv = lu
            .try_inverse()
            .ok_or_else(|| Error::NotStabilizable("singular Hamiltonian iterate".into()))?;
        let c = det.abs().powf(1.0 / n);
        let next = (&z / c + zinv * c) * 0.5;
        let delta = (&next - &z).norm();
        z = next;
        if delta <= 1e-13 * z.norm() {
            return Ok(z);
        }
    }
    Err(Error::NotStabilizable(
        "matrix sign iteration did not converge (imaginary-axis eigenvalues)".into(),
    ))
}

/// LQR gain `K = −R⁻¹BᵀX` for the control law `u = Kx`.
pub fn riccati_gain(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let x = care(a, b, q, r)?;
    let k = -(inverse(r, "R")? * b.transpose() * x);
    let abscissa = spectral_abscissa(&(a + b * &k));
    if !(abscissa < 0.0) {
        return Err(Error::NotStabilizable(format!(
            "closed loop A + BK has eigenvalue with real part {abscissa:.3e}"
        )));
    }
    Ok(k)
}
