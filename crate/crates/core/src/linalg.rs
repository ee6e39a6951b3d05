//! Small dense helpers shared by the filters.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const EIGEN_RCOND: f64 = 1e-14;

/// Replaces `m` by `(m + mᵀ) / 2` in place.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Infinity norm (max absolute row sum).
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖m − mᵀ‖∞`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    norm_inf(&(m - m.transpose()))
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    SymmetricEigen::new(s)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Finite, symmetric within `1e-9` and PSD within `−1e-9·‖m‖∞`.
pub fn is_healthy_covariance(m: &DMatrix<f64>) -> bool {
    if m.iter().any(|x| !x.is_finite()) {
        return false;
    }
    let norm = norm_inf(m);
    asymmetry(m) <= 1e-9 && min_eigenvalue(m) >= -1e-9 * norm
}

/// Factorisation of a symmetric positive (semi)definite matrix used for
/// repeated solves: Cholesky when it succeeds, eigen-decomposition otherwise.
pub enum SpdFactor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Eigen { vectors: DMatrix<f64>, inv_values: DVector<f64>, log_det: f64 },
}

impl SpdFactor {
    pub fn new(a: &DMatrix<f64>, context: &'static str) -> Result<Self> {
        if let Some(chol) = a.clone().cholesky() {
            return Ok(SpdFactor::Cholesky(chol));
        }
        let mut s = a.clone();
        symmetrize(&mut s);
        let eig = SymmetricEigen::new(s);
        let max = eig.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if !(max > 0.0) || min <= max * EIGEN_RCOND {
            let condition = if min > 0.0 { max / min } else { f64::INFINITY };
            return Err(Error::Singular { context, condition });
        }
        let inv_values = eig.eigenvalues.map(|v| 1.0 / v);
        let log_det = eig.eigenvalues.iter().map(|v| v.ln()).sum();
        Ok(SpdFactor::Eigen { vectors: eig.eigenvectors, inv_values, log_det })
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SpdFactor::Cholesky(c) => c.solve(b),
            SpdFactor::Eigen { vectors, inv_values, .. } => {
                let mut tmp = vectors.transpose() * b;
                for (i, mut row) in tmp.row_iter_mut().enumerate() {
                    row *= inv_values[i];
                }
                vectors * tmp
            }
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdFactor::Cholesky(c) => c.solve(b),
            SpdFactor::Eigen { vectors, inv_values, .. } => {
                let tmp = (vectors.transpose() * b).component_mul(inv_values);
                vectors * tmp
            }
        }
    }

    pub fn ln_determinant(&self) -> f64 {
        match self {
            SpdFactor::Cholesky(c) => 2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>(),
            SpdFactor::Eigen { log_det, .. } => *log_det,
        }
    }
}

/// Log density of `N(x; mean, cov)`.
pub fn gaussian_ln_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let factor = SpdFactor::new(cov, "gaussian density")?;
    let r = x - mean;
    let maha = r.dot(&factor.solve_vec(&r));
    let dim = x.len() as f64;
    Ok(-0.5 * (maha + factor.ln_determinant() + dim * (2.0 * std::f64::consts::PI).ln()))
}

/// Squared Mahalanobis distance `rᵀ S⁻¹ r`.
pub fn mahalanobis_sq(r: &DVector<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    let factor = SpdFactor::new(cov, "mahalanobis distance")?;
    Ok(r.dot(&factor.solve_vec(r)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetrize_averages_off_diagonal() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 4.0, 3.0]);
        symmetrize(&mut m);
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
    }

    #[test]
    fn eigen_fallback_solves_semidefinite_edge() {
        // Not PD by Cholesky's standards due to a tiny negative pivot but still invertible.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-3]);
        let f = SpdFactor::new(&a, "test").unwrap();
        let x = f.solve_vec(&DVector::from_vec(vec![1.0, 1.0]));
        assert!((x[1] - 1e3).abs() < 1e-9);
        assert!((f.ln_determinant() - (1e-3f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_reports_condition() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        match SpdFactor::new(&a, "test") {
            Err(Error::Singular { condition, .. }) => assert!(condition > 1e12),
            other => panic!("expected singular error, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn standard_normal_at_mode() {
        let x = DVector::from_vec(vec![0.0]);
        let p = gaussian_ln_pdf(&x, &x, &DMatrix::identity(1, 1)).unwrap().exp();
        assert!((p - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);
    }
}
