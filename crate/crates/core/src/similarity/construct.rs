use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{is_positive_definite, DistanceMatrix, PdCertificate, SimilarityMatrix, DEFAULT_PD_TOLERANCE};
use crate::error::{Error, Result};

/// `Z_ij = exp(-tau D_ij)`. Distinct elements must be at positive distance.
pub fn similarity_from_metric(d: &DistanceMatrix, tau: f64) -> Result<SimilarityMatrix> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::ParameterOutOfRange { name: "tau", value: tau, reason: "must be positive and finite" });
    }
    d.check_separated()?;
    let z = d.entries().map(|x| (-tau * x).exp());
    Ok(SimilarityMatrix::from_dense_unchecked(z))
}

const TAU_BRACKET: (f64, f64) = (1e-12, 1e12);
const TAU_BISECTION_STEPS: usize = 200;
const TAU_MEDIAN_TOLERANCE: f64 = 1e-9;

/// Finds `tau` such that the median off-diagonal similarity `exp(-tau D_ij)`
/// equals `target`. Bisects on `ln tau` over `[1e-12, 1e12]`.
pub fn calibrate_tau(d: &DistanceMatrix, target_median_similarity: f64) -> Result<f64> {
    let target = target_median_similarity;
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::ParameterOutOfRange { name: "target", value: target, reason: "must lie in (0, 1)" });
    }
    let mut dist = d.upper_triangle();
    if dist.iter().all(|&x| x == 0.0) {
        return Err(Error::InvalidConfig("all off-diagonal distances are zero".into()));
    }
    dist.sort_by(f64::total_cmp);
    // exp(-tau x) is decreasing in x, so the median similarity comes from the
    // median distance (or the two middle ones).
    let k = dist.len();
    let (lo_d, hi_d) = if k % 2 == 1 { (dist[k / 2], dist[k / 2]) } else { (dist[k / 2 - 1], dist[k / 2]) };
    let median = |tau: f64| 0.5 * ((-tau * lo_d).exp() + (-tau * hi_d).exp());

    let (mut lo, mut hi) = (TAU_BRACKET.0.ln(), TAU_BRACKET.1.ln());
    for _ in 0..TAU_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if median(mid.exp()) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = (0.5 * (lo + hi)).exp();
    if (median(tau) - target).abs() > TAU_MEDIAN_TOLERANCE {
        return Err(Error::NotConverged { iterations: TAU_BISECTION_STEPS });
    }
    Ok(tau)
}

/// `Z_ij = 1 - D_ij / max D`. Positive definiteness is checked numerically
/// and recorded when it holds; the matrix is returned either way.
pub fn similarity_linear_from_metric(d: &DistanceMatrix) -> Result<SimilarityMatrix> {
    let max = d.max_distance();
    if !(max > 0.0) {
        return Err(Error::InvalidConfig("maximum distance is zero".into()));
    }
    let z = d.entries().map(|x| 1.0 - x / max);
    let z = SimilarityMatrix::from_dense_unchecked(z);
    let (ok, min_eigenvalue) = is_positive_definite(&z, DEFAULT_PD_TOLERANCE);
    Ok(if ok { z.with_certificate(PdCertificate { min_eigenvalue, tolerance: DEFAULT_PD_TOLERANCE }) } else { z })
}

/// Elements described by their code path from the root of a hierarchy, with a
/// similarity value per level of the lowest common ancestor.
///
/// `level_similarity[k]` is the similarity of two elements whose paths agree
/// on exactly their first `k` codes; the last entry (all codes equal) is 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy {
    paths: Vec<Vec<String>>,
    level_similarity: Vec<f64>,
}

impl Hierarchy {
    pub fn new(paths: Vec<Vec<String>>, level_similarity: Vec<f64>) -> Result<Self> {
        let depth = paths.first().ok_or(Error::Empty("hierarchy"))?.len();
        if paths.iter().any(|p| p.len() != depth) {
            return Err(Error::InvalidHierarchy("paths have different lengths".into()));
        }
        if level_similarity.len() != depth + 1 {
            return Err(Error::InvalidHierarchy(format!(
                "expected {} level similarities for paths of length {depth}, got {}",
                depth + 1,
                level_similarity.len()
            )));
        }
        if level_similarity.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::InvalidHierarchy("level similarities must lie in [0, 1]".into()));
        }
        if level_similarity.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidHierarchy("level similarity must be nondecreasing".into()));
        }
        if level_similarity[depth] != 1.0 {
            return Err(Error::InvalidHierarchy("similarity at the leaf level must be 1".into()));
        }
        for i in 0..paths.len() {
            for j in (i + 1)..paths.len() {
                if paths[i] == paths[j] {
                    return Err(Error::InvalidHierarchy(format!("elements {i} and {j} share a path")));
                }
            }
        }
        Ok(Self { paths, level_similarity })
    }

    /// Splits each code into single characters, e.g. SOC `"113"` becomes
    /// the path `1 / 1 / 3`.
    pub fn from_digit_codes<S: AsRef<str>>(codes: &[S], level_similarity: Vec<f64>) -> Result<Self> {
        let paths = codes.iter().map(|c| c.as_ref().chars().map(String::from).collect()).collect();
        Self::new(paths, level_similarity)
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn depth(&self) -> usize {
        self.level_similarity.len() - 1
    }

    pub fn level_similarity(&self) -> &[f64] {
        &self.level_similarity
    }

    /// Level of the lowest common ancestor of elements `i` and `j`.
    pub fn lca_level(&self, i: usize, j: usize) -> usize {
        self.paths[i].iter().zip(&self.paths[j]).take_while(|(a, b)| a == b).count()
    }

    /// Edge weight between levels `k` and `k + 1` of the tree whose
    /// `exp(-d)` kernel reproduces the level similarities:
    /// `0.5 * ln(f(k+1) / f(k))`. Needs strictly increasing positive `f`.
    pub fn edge_weights(&self) -> Result<Vec<f64>> {
        let f = &self.level_similarity;
        if f[0] <= 0.0 || f.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidHierarchy("edge weights need strictly increasing positive similarities".into()));
        }
        Ok(f.windows(2).map(|w| 0.5 * (w[1] / w[0]).ln()).collect())
    }

    /// Shortest-path metric between the leaves of the weighted tree.
    pub fn tree_metric(&self) -> Result<DistanceMatrix> {
        let w = self.edge_weights()?;
        let depth = self.depth();
        // distance from a leaf up to an ancestor at level h
        let climb = |h: usize| -> f64 { w[h..depth].iter().sum() };
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 2.0 * climb(self.lca_level(i, j)) });
        DistanceMatrix::new(m)
    }
}

/// `Z_ij = f(level of the lowest common ancestor of i and j)`.
pub fn similarity_from_hierarchy(h: &Hierarchy) -> Result<SimilarityMatrix> {
    let n = h.len();
    let f = h.level_similarity();
    let z = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { f[h.lca_level(i, j)] });
    Ok(SimilarityMatrix::from_dense_unchecked(z))
}
