use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{frobenius, min_eigenvalue, PdCertificate, SimilarityMatrix, SYMMETRY_TOLERANCE};
use crate::error::{Error, Result};

/// Numerical slack when accepting a matrix as PSD.
const PSD_SLACK: f64 = 1e-10;

/// `delta I + (1 - delta) M` for a PSD similarity matrix `M`.
pub fn lift_psd_to_pd(m: &SimilarityMatrix, delta: f64) -> Result<SimilarityMatrix> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::ParameterOutOfRange { name: "delta", value: delta, reason: "must lie in (0, 1]" });
    }
    let dense = m.to_dense();
    let lambda = min_eigenvalue(&dense);
    if lambda < -PSD_SLACK {
        return Err(Error::NotPositiveSemidefinite { min_eigenvalue: lambda });
    }
    let n = dense.nrows();
    let lifted = DMatrix::identity(n, n) * delta + dense * (1.0 - delta);
    let bound = delta + (1.0 - delta) * lambda.max(0.0);
    let z = SimilarityMatrix::new(lifted)?;
    Ok(z.with_certificate(PdCertificate { min_eigenvalue: bound, tolerance: PSD_SLACK }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearestPdParams {
    /// Lower bound on the smallest eigenvalue of the result.
    pub delta: f64,
    /// Upper bound on off-diagonal entries.
    pub offdiag_cap: f64,
    pub max_iters: usize,
    /// Stop when successive iterates, and the spectral and box iterates,
    /// differ by less than this (Frobenius).
    pub tol: f64,
}

impl Default for NearestPdParams {
    fn default() -> Self {
        Self { delta: 1e-6, offdiag_cap: 1.0 - 1e-9, max_iters: 10_000, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct NearestPd {
    /// Final iterate; always satisfies the box and diagonal constraints.
    pub matrix: SimilarityMatrix,
    pub converged: bool,
    pub iterations: usize,
    pub min_eigenvalue: f64,
    /// Frobenius distance to the input.
    pub distance: f64,
}

fn project_spectral(x: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(x.clone());
    if eig.eigenvalues.iter().all(|&l| l >= delta) {
        return x.clone();
    }
    let clamped = eig.eigenvalues.map(|l| l.max(delta));
    let v = &eig.eigenvectors;
    let y = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    0.5 * (&y + y.transpose())
}

fn project_box(x: &DMatrix<f64>, cap: f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| if i == j { 1.0 } else { x[(i, j)].clamp(0.0, cap) })
}

/// Frobenius-nearest matrix with unit diagonal, off-diagonals in
/// `[0, offdiag_cap]` and `Z - delta I` PSD, by alternating projections with
/// Dykstra corrections on both sets.
///
/// Non-convergence is reported through [`NearestPd::converged`] rather than
/// as an error, with the last iterate returned.
pub fn nearest_pd_similarity(m: &DMatrix<f64>, params: NearestPdParams) -> Result<NearestPd> {
    let NearestPdParams { delta, offdiag_cap, max_iters, tol } = params;
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    let n = m.nrows();
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::ParameterOutOfRange { name: "delta", value: delta, reason: "must lie in (0, 1]" });
    }
    if !(offdiag_cap > 0.0 && offdiag_cap <= 1.0) {
        return Err(Error::ParameterOutOfRange {
            name: "offdiag_cap",
            value: offdiag_cap,
            reason: "must lie in (0, 1]",
        });
    }
    if !(tol > 0.0) {
        return Err(Error::ParameterOutOfRange { name: "tol", value: tol, reason: "must be positive" });
    }
    for i in 0..n {
        for j in 0..n {
            let v = m[(i, j)];
            if !v.is_finite() {
                return Err(Error::InvalidEntry { i, j, value: v, reason: "not finite" });
            }
            if j > i && (v - m[(j, i)]).abs() > 1e-9 {
                return Err(Error::NotSymmetric { i, j, a: v, b: m[(j, i)] });
            }
        }
    }
    let start = 0.5 * (m + m.transpose());

    let mut x = start.clone();
    let mut p = DMatrix::zeros(n, n);
    let mut q = DMatrix::zeros(n, n);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let y = project_spectral(&(&x + &p), delta);
        p = &x + &p - &y;
        let next = project_box(&(&y + &q), offdiag_cap);
        q = &y + &q - &next;
        // The box iterate alone can stall while the corrections still move,
        // so also require the two projections to agree.
        let change = frobenius(&next, &x);
        let gap = frobenius(&next, &y);
        x = next;
        if change < tol && gap < tol {
            converged = true;
            break;
        }
    }
    let lambda = min_eigenvalue(&x);
    let distance = frobenius(&x, &start);
    let mut matrix = SimilarityMatrix::from_dense_unchecked(x);
    if lambda > 0.0 {
        matrix = matrix.with_certificate(PdCertificate { min_eigenvalue: lambda, tolerance: SYMMETRY_TOLERANCE });
    }
    Ok(NearestPd { matrix, converged, iterations, min_eigenvalue: lambda, distance })
}
