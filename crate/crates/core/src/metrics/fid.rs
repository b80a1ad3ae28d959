use nalgebra::{DMatrix, SymmetricEigen};

use super::FeatureStats;
use crate::error::{Error, Result};

const REGULARIZATION: f64 = 1e-6;

fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigendecomposition failed".into()));
    }
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.iter().any(|&v| v < -1e-8 * scale) {
        return Err(Error::Numerical("covariance is not positive semidefinite".into()));
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

fn trace_sqrt_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    // tr sqrt(A B) = tr sqrt(A^1/2 B A^1/2), and the latter is symmetric
    let ra = psd_sqrt(a)?;
    let inner = &ra * b * &ra;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = SymmetricEigen::new(inner);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("eigendecomposition failed".into()));
    }
    Ok(eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum())
}

/// Frechet distance between two Gaussian fits.
pub fn fid(a: &FeatureStats, b: &FeatureStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape(a.dim(), b.dim()));
    }
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let tr = a.covariance.trace() + b.covariance.trace();
    let cross = match trace_sqrt_product(&a.covariance, &b.covariance) {
        Ok(v) => v,
        Err(_) => {
            let eye = DMatrix::<f64>::identity(a.dim(), a.dim()) * REGULARIZATION;
            trace_sqrt_product(&(&a.covariance + &eye), &(&b.covariance + &eye))?
        }
    };
    let d = mean_term + tr - 2.0 * cross;
    if !d.is_finite() {
        return Err(Error::Numerical("non-finite FID".into()));
    }
    // rounding can push identical sets slightly below zero
    Ok(d.max(0.0))
}
