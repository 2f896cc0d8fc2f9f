use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Sample second-moment matrix `mean(a a^T)` of indicator vectors. The
/// objective's Hessian over one band is the negation of this matrix.
pub fn second_moment_matrix(samples: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = samples
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::InsufficientData("no samples".into()))?;
    let mut acc = DMatrix::zeros(n, n);
    for s in samples {
        if s.len() != n {
            return Err(Error::ShapeMismatch("samples of unequal length".into()));
        }
        let a = DVector::from_column_slice(s);
        acc.ger(1.0, &a, &a, 1.0);
    }
    Ok(acc / samples.len() as f64)
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(matrix: DMatrix<f64>) -> f64 {
    SymmetricEigen::new(matrix).eigenvalues.min()
}
