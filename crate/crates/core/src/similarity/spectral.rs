use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, SimilarityMatrix};

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    m.clone().symmetric_eigenvalues().min()
}

/// `(lambda_min > tol, lambda_min)`.
pub fn is_positive_definite(z: &SimilarityMatrix, tol: f64) -> (bool, f64) {
    let lambda = match z.dense() {
        None => 1.0,
        Some(m) => min_eigenvalue(m),
    };
    (lambda > tol, lambda)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeTypeReport {
    /// `v' D v <= tol` for every `v` orthogonal to the ones vector.
    pub negative_type: bool,
    /// `v' D v < -tol` for every nonzero such `v`.
    pub strictly_negative_type: bool,
    /// Smallest eigenvalue of `-D` restricted to the complement of the ones vector.
    pub min_eigenvalue: f64,
    /// Absolute tolerance actually applied (`tol * ||D||_F`).
    pub tolerance: f64,
}

/// Orthonormal basis of the complement of the ones vector (Helmert contrasts),
/// as an `n x (n-1)` matrix.
fn helmert_basis(n: usize) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(n, n.saturating_sub(1));
    for k in 1..n {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            v[(i, k - 1)] = 1.0 / norm;
        }
        v[(k, k - 1)] = -(k as f64) / norm;
    }
    v
}

/// Negative-type test via the spectrum of `-V' D V`, where the columns of `V`
/// span the complement of the ones vector. `tol` is relative to `||D||_F`.
pub fn is_negative_type(d: &DistanceMatrix, tol: f64) -> NegativeTypeReport {
    let n = d.dim();
    let abs_tol = tol * d.entries().norm();
    if n < 2 {
        return NegativeTypeReport {
            negative_type: true,
            strictly_negative_type: true,
            min_eigenvalue: f64::INFINITY,
            tolerance: abs_tol,
        };
    }
    let v = helmert_basis(n);
    let restricted = -(v.transpose() * d.entries() * &v);
    let sym = 0.5 * (&restricted + restricted.transpose());
    let lambda = min_eigenvalue(&sym);
    NegativeTypeReport {
        negative_type: lambda >= -abs_tol,
        strictly_negative_type: lambda > abs_tol,
        min_eigenvalue: lambda,
        tolerance: abs_tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helmert_is_orthonormal_and_centered() {
        let v = helmert_basis(6);
        let gram = v.transpose() * &v;
        assert!((gram - DMatrix::identity(5, 5)).norm() < 1e-14);
        for c in v.column_iter() {
            assert!(c.sum().abs() < 1e-14);
        }
    }

    #[test]
    fn pd_examples() {
        let (ok, l) = is_positive_definite(&SimilarityMatrix::identity(4), 1e-12);
        assert!(ok && l == 1.0);
        let dense_i = SimilarityMatrix::new(DMatrix::identity(4, 4)).unwrap();
        let (ok, l) = is_positive_definite(&dense_i, 1e-12);
        assert!(ok && (l - 1.0).abs() < 1e-14);
        let ones = SimilarityMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let (ok, l) = is_positive_definite(&ones, 1e-12);
        assert!(!ok && l.abs() < 1e-12);
    }

    #[test]
    fn k23_graph_metric_is_not_negative_type() {
        // complete bipartite K_{2,3}: distance 1 across sides, 2 within a side
        let side = |i: usize| usize::from(i >= 2);
        let d = DistanceMatrix::new(DMatrix::from_fn(5, 5, |i, j| {
            if i == j {
                0.0
            } else if side(i) == side(j) {
                2.0
            } else {
                1.0
            }
        }))
        .unwrap();
        let r = is_negative_type(&d, 1e-9);
        assert!(!r.negative_type, "{r:?}");
    }
}
