//! Thin wrappers over nalgebra's symmetric/Hermitian eigen-solver.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::EigenFailure)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Eigenvalues of a real symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = nalgebra::SymmetricEigen::try_new(m.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::EigenFailure)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Smallest eigenvalue of a positive semidefinite matrix, given its
/// spectrum. Values within `-1e-9 · ‖G‖` of zero are clamped to zero; more
/// negative values are reported as an error.
pub fn clamp_psd_minimum(eigenvalues: &[f64]) -> Result<f64> {
    let Some(&lambda_min) = eigenvalues.first() else {
        return Err(Error::InvalidArgument("empty matrix".into()));
    };
    let norm = eigenvalues.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    if lambda_min >= 0.0 {
        Ok(lambda_min)
    } else if lambda_min >= -1e-9 * norm {
        Ok(0.0)
    } else {
        Err(Error::NotPositiveSemidefinite { lambda_min, norm })
    }
}
