//! All-pairs Jensen-Bregman dissimilarities.
//!
//! The naive route calls [`Geometry::jensen_bregman`] once per pair, paying
//! three matrix-vector products each time. The fast routes precompute
//! `S = Z P` and the member entropies once: the ordinariness of a midpoint is
//! then the average of two columns of `S`, so each pair costs O(n). At
//! `alpha = 2` everything reduces to the Gram matrix `P' Z P`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{clamp_divergence, pow, Geometry, OrderParameter};
use crate::error::{Error, Result};
use crate::par::{try_map_indices, Execution};
use crate::similarity::SimilarityMatrix;
use crate::simplex::Distribution;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairwiseMethod {
    JensenBregman,
    Wasserstein1,
}

/// Symmetric `m x m` dissimilarities with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseDissimilarityMatrix {
    pub values: DMatrix<f64>,
    pub method: PairwiseMethod,
}

impl PairwiseDissimilarityMatrix {
    /// Builds the matrix from the strict upper triangle given row by row.
    pub(crate) fn from_upper_rows(m: usize, rows: Vec<Vec<f64>>, method: PairwiseMethod) -> Self {
        let mut values = DMatrix::zeros(m, m);
        for (i, row) in rows.into_iter().enumerate() {
            for (offset, v) in row.into_iter().enumerate() {
                let j = i + 1 + offset;
                values[(i, j)] = v;
                values[(j, i)] = v;
            }
        }
        Self { values, method }
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    /// Strict upper triangle, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let m = self.len();
        (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).map(|(i, j)| self.values[(i, j)]).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.values - &other.values).abs().max()
    }
}

fn check_members(z: &SimilarityMatrix, members: &[Distribution]) -> Result<()> {
    for p in members {
        if p.dim() != z.dim() {
            return Err(Error::DimensionMismatch { expected: z.dim(), got: p.dim() });
        }
        p.check_interior()?;
    }
    Ok(())
}

/// One independent Jensen-Bregman evaluation per pair.
pub fn all_pairs_jbd_naive(
    z: &SimilarityMatrix,
    alpha: OrderParameter,
    members: &[Distribution],
    exec: Execution,
) -> Result<PairwiseDissimilarityMatrix> {
    let geom = Geometry::new(z, alpha)?;
    check_members(z, members)?;
    let m = members.len();
    let rows = try_map_indices(exec, m, |i| {
        ((i + 1)..m).map(|j| geom.jensen_bregman(&members[i], &members[j])).collect::<Result<Vec<_>>>()
    })?;
    Ok(PairwiseDissimilarityMatrix::from_upper_rows(m, rows, PairwiseMethod::JensenBregman))
}

/// Columns are the members.
fn stack(members: &[Distribution], n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(n, members.len());
    for (a, member) in members.iter().enumerate() {
        p.column_mut(a).copy_from_slice(member);
    }
    p
}

/// General-order fast route: midpoint entropies from column averages of `S = Z P`.
pub fn all_pairs_jbd_midpoint(
    z: &SimilarityMatrix,
    alpha: OrderParameter,
    members: &[Distribution],
    exec: Execution,
) -> Result<PairwiseDissimilarityMatrix> {
    let geom = Geometry::new(z, alpha)?;
    check_members(z, members)?;
    let a = geom.alpha();
    let e = a - 1.0;
    let n = z.dim();
    let m = members.len();
    let p = stack(members, n);
    let s = z.apply_matrix(&p);
    // p_a' s_a^(alpha-1) per member
    let self_terms: Vec<f64> =
        (0..m).map(|c| p.column(c).iter().zip(s.column(c).iter()).map(|(x, y)| x * pow(*y, e)).sum()).collect();
    let rows = try_map_indices(exec, m, |i| {
        let (pi, si) = (p.column(i), s.column(i));
        ((i + 1)..m)
            .map(|j| {
                let (pj, sj) = (p.column(j), s.column(j));
                let mut mid = 0.0;
                for k in 0..n {
                    mid += 0.5 * (pi[k] + pj[k]) * pow(0.5 * (si[k] + sj[k]), e);
                }
                // H(mid) - (H_i + H_j)/2 with H = (1 - t)/e; the constants cancel
                clamp_divergence((0.5 * (self_terms[i] + self_terms[j]) - mid) / e)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(PairwiseDissimilarityMatrix::from_upper_rows(m, rows, PairwiseMethod::JensenBregman))
}

/// `alpha = 2` route through the Gram matrix `G = P' Z P`:
/// `JBD(a, b) = (G_aa - 2 G_ab + G_bb) / 4`.
pub fn all_pairs_jbd_gram(z: &SimilarityMatrix, members: &[Distribution]) -> Result<PairwiseDissimilarityMatrix> {
    Geometry::new(z, OrderParameter::new(2.0)?)?;
    check_members(z, members)?;
    let m = members.len();
    let p = stack(members, z.dim());
    let g = p.transpose() * z.apply_matrix(&p);
    let rows = (0..m)
        .map(|i| {
            ((i + 1)..m)
                .map(|j| clamp_divergence(0.25 * (g[(i, i)] - 2.0 * g[(i, j)] + g[(j, j)])))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairwiseDissimilarityMatrix::from_upper_rows(m, rows, PairwiseMethod::JensenBregman))
}

/// Fast all-pairs Jensen-Bregman: Gram route at `alpha = 2`, midpoint route otherwise.
pub fn all_pairs_jbd_fast(
    z: &SimilarityMatrix,
    alpha: OrderParameter,
    members: &[Distribution],
    exec: Execution,
) -> Result<PairwiseDissimilarityMatrix> {
    if alpha.value() == 2.0 {
        all_pairs_jbd_gram(z, members)
    } else {
        all_pairs_jbd_midpoint(z, alpha, members, exec)
    }
}
