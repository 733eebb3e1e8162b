//! Similarity and distance matrices, and the routes to positive definite
//! similarity matrices: metric kernels, hierarchies, linear rescaling,
//! PSD lifting and nearest-PD repair.

mod construct;
mod repair;
mod spectral;

pub use construct::{
    calibrate_tau, similarity_from_hierarchy, similarity_from_metric, similarity_linear_from_metric, Hierarchy,
};
pub use repair::{lift_psd_to_pd, nearest_pd_similarity, NearestPd, NearestPdParams};
pub use spectral::{is_negative_type, is_positive_definite, min_eigenvalue, NegativeTypeReport};

use nalgebra::DMatrix;
#[cfg(test)]
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance for matrices read from user input.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Default tolerance on the smallest eigenvalue when certifying Z > 0.
pub const DEFAULT_PD_TOLERANCE: f64 = 1e-12;

/// Smallest-eigenvalue record attached to a certified similarity matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdCertificate {
    pub min_eigenvalue: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Identity(usize),
    Dense(DMatrix<f64>),
}

/// Symmetric matrix with entries in `[0, 1]` and unit diagonal.
///
/// The identity is stored implicitly so structure-blind runs never build an
/// `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    repr: Repr,
    certificate: Option<PdCertificate>,
}

impl SimilarityMatrix {
    /// Validates a dense matrix. Off-by-rounding entries (within
    /// [`SYMMETRY_TOLERANCE`]) are snapped: the diagonal to 1, the range to
    /// `[0, 1]`, and the two triangles to their average.
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        let n = check_square(&m)?;
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidEntry { i, j, value: v, reason: "not finite" });
                }
                if i == j {
                    if (v - 1.0).abs() > SYMMETRY_TOLERANCE {
                        return Err(Error::InvalidEntry { i, j, value: v, reason: "diagonal must be 1" });
                    }
                } else if !(-SYMMETRY_TOLERANCE..=1.0 + SYMMETRY_TOLERANCE).contains(&v) {
                    return Err(Error::InvalidEntry { i, j, value: v, reason: "similarity must lie in [0, 1]" });
                }
                if j > i && (v - m[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::NotSymmetric { i, j, a: v, b: m[(j, i)] });
                }
            }
        }
        for i in 0..n {
            m[(i, i)] = 1.0;
            for j in (i + 1)..n {
                let v = (0.5 * (m[(i, j)] + m[(j, i)])).clamp(0.0, 1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self { repr: Repr::Dense(m), certificate: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    /// The implicit identity; certified with smallest eigenvalue 1.
    pub fn identity(n: usize) -> Self {
        Self { repr: Repr::Identity(n), certificate: Some(PdCertificate { min_eigenvalue: 1.0, tolerance: 0.0 }) }
    }

    pub(crate) fn from_dense_unchecked(m: DMatrix<f64>) -> Self {
        Self { repr: Repr::Dense(m), certificate: None }
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Identity(n) => *n,
            Repr::Dense(m) => m.nrows(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.repr, Repr::Identity(_))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match &self.repr {
            Repr::Identity(_) => f64::from(u8::from(i == j)),
            Repr::Dense(m) => m[(i, j)],
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Identity(n) => DMatrix::identity(*n, *n),
            Repr::Dense(m) => m.clone(),
        }
    }

    /// Dense view, `None` for the implicit identity.
    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Identity(_) => None,
            Repr::Dense(m) => Some(m),
        }
    }

    /// `Z x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Identity(_) => x.to_vec(),
            Repr::Dense(m) => {
                let n = m.nrows();
                let mut out = vec![0.0; n];
                // column-major storage: accumulate column by column
                for (j, &xj) in x.iter().enumerate() {
                    if xj == 0.0 {
                        continue;
                    }
                    let col = m.column(j);
                    for (o, z) in out.iter_mut().zip(col.iter()) {
                        *o += z * xj;
                    }
                }
                out
            }
        }
    }

    /// `Z X` for a matrix whose columns are vectors over the support.
    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.repr {
            Repr::Identity(_) => x.clone(),
            Repr::Dense(m) => m * x,
        }
    }

    pub fn certificate(&self) -> Option<PdCertificate> {
        self.certificate
    }

    pub fn is_certified(&self) -> bool {
        self.certificate.is_some()
    }

    /// Checks `Z > 0` once and records the result.
    pub fn certify_pd(mut self, tolerance: f64) -> Result<Self> {
        if self.certificate.is_some() {
            return Ok(self);
        }
        let (ok, min_eigenvalue) = is_positive_definite(&self, tolerance);
        if !ok {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        self.certificate = Some(PdCertificate { min_eigenvalue, tolerance });
        Ok(self)
    }

    pub fn certified(self) -> Result<Self> {
        self.certify_pd(DEFAULT_PD_TOLERANCE)
    }

    pub(crate) fn with_certificate(mut self, cert: PdCertificate) -> Self {
        self.certificate = Some(cert);
        self
    }

    /// True when every entry is at least the corresponding entry of `other`.
    pub fn dominates(&self, other: &SimilarityMatrix) -> bool {
        let n = self.dim();
        n == other.dim() && (0..n).all(|i| (0..n).all(|j| self.get(i, j) >= other.get(i, j)))
    }
}

/// Symmetric, nonnegative matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    entries: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn new(mut m: DMatrix<f64>) -> Result<Self> {
        let n = check_square(&m)?;
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        for i in 0..n {
            for j in 0..n {
                let v = m[(i, j)];
                if !v.is_finite() {
                    return Err(Error::InvalidEntry { i, j, value: v, reason: "not finite" });
                }
                if i == j && v != 0.0 {
                    return Err(Error::InvalidEntry { i, j, value: v, reason: "diagonal must be 0" });
                }
                if v < 0.0 {
                    return Err(Error::InvalidEntry { i, j, value: v, reason: "distance must be nonnegative" });
                }
                if j > i && (v - m[(j, i)]).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::NotSymmetric { i, j, a: v, b: m[(j, i)] });
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(Self { entries: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    /// Pairwise distances between points under `metric`.
    pub fn from_points<F>(points: &[Vec<f64>], metric: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> f64,
    {
        let n = points.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                let d = metric(&points[i], &points[j]);
                m[(i, j)] = d;
                m[(j, i)] = d;
            }
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn max_distance(&self) -> f64 {
        self.entries.max()
    }

    /// Off-diagonal entries of the strict upper triangle, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let n = self.dim();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| self.entries[(i, j)]).collect()
    }

    /// Distinct elements must be at positive distance.
    pub fn check_separated(&self) -> Result<()> {
        let n = self.dim();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.entries[(i, j)] <= 0.0 {
                    return Err(Error::InvalidEntry {
                        i,
                        j,
                        value: self.entries[(i, j)],
                        reason: "distinct elements at zero distance",
                    });
                }
            }
        }
        Ok(())
    }

    /// O(n^3) triangle-inequality check with absolute slack `tol`.
    pub fn check_triangle(&self, tol: f64) -> Result<()> {
        let n = self.dim();
        let d = &self.entries;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if d[(i, k)] > d[(i, j)] + d[(j, k)] + tol {
                        return Err(Error::TriangleInequality { i, j, k });
                    }
                }
            }
        }
        Ok(())
    }
}

fn check_square(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare { rows: m.nrows(), cols: m.ncols() });
    }
    Ok(m.nrows())
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::NotSquare { rows: n, cols: bad.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
pub(crate) fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
