//! Hard clustering of weighted distribution ensembles by Bregman k-means,
//! with between/within Bregman-information accounting and AMI scoring.

mod ami;
mod kmeans;

pub use ami::adjusted_mutual_information;
pub use kmeans::{
    bregman_kmeans, bregman_kmeans_with_inits, empty_cluster_repair, ClusteringReport, KMeansConfig, RestartSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::Geometry;
use crate::simplex::{weighted_mean, Distribution, WeightedEnsemble};

/// Hard assignment of ensemble members to `k` clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub assignments: Vec<usize>,
    pub k: usize,
    /// Between-cluster information over total information.
    pub explained_fraction: f64,
}

/// One cluster's share of the information budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterContribution {
    pub size: usize,
    /// Total weight of the members.
    pub weight: f64,
    /// Bregman information of the cluster on its own (normalized weights).
    pub internal_information: f64,
    /// `weight * internal_information`
    pub within: f64,
    /// `weight * d(cluster mean || overall mean)`
    pub between: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationDecomposition {
    pub total: f64,
    pub between: f64,
    pub within: f64,
    pub clusters: Vec<ClusterContribution>,
    #[serde(skip)]
    pub centroids: Vec<Distribution>,
}

impl InformationDecomposition {
    /// `between / total`, or 0 when the ensemble carries no information.
    pub fn explained_fraction(&self) -> f64 {
        if self.total > 0.0 {
            (self.between / self.total).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

fn check_assignments(ensemble: &WeightedEnsemble, assignments: &[usize], k: usize) -> Result<Vec<Vec<usize>>> {
    if assignments.len() != ensemble.len() {
        return Err(Error::DimensionMismatch { expected: ensemble.len(), got: assignments.len() });
    }
    let mut members = vec![Vec::new(); k];
    for (a, &c) in assignments.iter().enumerate() {
        if c >= k {
            return Err(Error::InvalidPartition(format!("member {a} has label {c} >= k = {k}")));
        }
        members[c].push(a);
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidPartition(format!("cluster {c} is empty")));
    }
    Ok(members)
}

/// Weighted mean of a cluster; plain average if the cluster has zero weight.
pub(crate) fn cluster_mean(ensemble: &WeightedEnsemble, idx: &[usize]) -> Distribution {
    let w = ensemble.weights();
    let p = ensemble.members();
    let total: f64 = idx.iter().map(|&a| w[a]).sum();
    if total > 0.0 {
        weighted_mean(idx.iter().map(|&a| (&p[a], w[a])), ensemble.dim())
    } else {
        weighted_mean(idx.iter().map(|&a| (&p[a], 1.0)), ensemble.dim())
    }
}

/// Splits the ensemble's Bregman information into between- and
/// within-cluster parts for the given assignment.
pub fn information_decomposition(
    geom: &Geometry<'_>,
    ensemble: &WeightedEnsemble,
    assignments: &[usize],
    k: usize,
) -> Result<InformationDecomposition> {
    let groups = check_assignments(ensemble, assignments, k)?;
    let mean = ensemble.mean();
    let total = geom.bregman_information(ensemble)?.value;
    let w = ensemble.weights();
    let p = ensemble.members();
    let mut clusters = Vec::with_capacity(k);
    let mut centroids = Vec::with_capacity(k);
    for idx in &groups {
        let centroid = cluster_mean(ensemble, idx);
        let weight: f64 = idx.iter().map(|&a| w[a]).sum();
        let mut within = 0.0;
        for &a in idx {
            within += w[a] * geom.divergence(&p[a], &centroid)?;
        }
        let between = weight * geom.divergence(&centroid, &mean)?;
        let internal_information = if weight > 0.0 { within / weight } else { 0.0 };
        clusters.push(ClusterContribution { size: idx.len(), weight, internal_information, within, between });
        centroids.push(centroid);
    }
    let between = clusters.iter().map(|c| c.between).sum();
    let within = clusters.iter().map(|c| c.within).sum();
    Ok(InformationDecomposition { total, between, within, clusters, centroids })
}
