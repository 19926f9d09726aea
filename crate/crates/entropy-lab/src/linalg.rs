//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

/// Cholesky factor (lower triangular) of a symmetric positive definite
/// matrix, or an invalid-parameter error.
pub fn cholesky_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(LabError::invalid("covariance must be square"));
    }
    if !is_symmetric(m, 1e-9) {
        return Err(LabError::invalid("covariance must be symmetric"));
    }
    nalgebra::Cholesky::new(m.clone())
        .map(|c| c.l())
        .ok_or_else(|| LabError::invalid("covariance must be positive definite"))
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax().max(1.0);
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            if (m[(i, j)] - m[(j, i)]).abs() > tol * scale {
                return false;
            }
        }
    }
    true
}

/// log of the determinant of an SPD matrix, from its Cholesky factor.
pub fn log_det_spd(m: &DMatrix<f64>) -> Result<f64> {
    let l = cholesky_spd(m)?;
    Ok(2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>())
}

/// Symmetric inverse square root times det-normalizer: returns W with
/// W Σ Wᵀ ∝ I and det W = 1.
pub fn det1_whitener(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    let eig = nalgebra::SymmetricEigen::new(sigma.clone());
    let mut log_lams = Vec::with_capacity(n);
    for &lam in eig.eigenvalues.iter() {
        if lam <= 0.0 {
            return Err(LabError::invalid("covariance not positive definite"));
        }
        log_lams.push(lam.ln());
    }
    let mean_log: f64 = log_lams.iter().sum::<f64>() / n as f64;
    // diag(exp((mean_log - log λ_i)/2)) in the eigenbasis
    let scales = DVector::from_iterator(
        n,
        log_lams.iter().map(|&ll| ((mean_log - ll) / 2.0).exp()),
    );
    let q = &eig.eigenvectors;
    let w = q * DMatrix::from_diagonal(&scales) * q.transpose();
    Ok(w)
}

/// Sample mean and covariance with a small diagonal ridge.
pub fn mean_cov_from_samples(samples: &[Vec<f64>], ridge: f64) -> (DVector<f64>, DMatrix<f64>) {
    let m = samples.len();
    let n = samples[0].len();
    let mut mean = DVector::zeros(n);
    for s in samples {
        for i in 0..n {
            mean[i] += s[i];
        }
    }
    mean /= m as f64;
    let mut cov = DMatrix::zeros(n, n);
    for s in samples {
        for i in 0..n {
            let di = s[i] - mean[i];
            for j in i..n {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    cov /= (m - 1).max(1) as f64;
    for i in 0..n {
        for j in 0..i {
            cov[(i, j)] = cov[(j, i)];
        }
        cov[(i, i)] += ridge;
    }
    (mean, cov)
}

pub fn is_diagonal(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.amax().max(1e-300);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)].abs() > tol * scale {
                return false;
            }
        }
    }
    true
}
