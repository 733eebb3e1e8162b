use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{cluster_mean, information_decomposition, InformationDecomposition, Partition};
use crate::error::{Error, Result};
use crate::info::{Anchor, Geometry, Point};
use crate::par::{try_map_indices, Execution};
use crate::rng::task_rng;
use crate::simplex::{Distribution, WeightedEnsemble};

/// Stop when the within-cluster information drops by less than this.
const MIN_DECREASE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub k: usize,
    pub n_restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl KMeansConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, n_restarts: 100, max_iters: 500, seed, exec: Execution::Parallel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartSummary {
    pub explained_fraction: f64,
    pub within: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Within-cluster information after every assignment step and every
    /// centroid step, in order; non-increasing.
    pub history: Vec<f64>,
    #[serde(skip)]
    assignments: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusteringReport {
    pub best: Partition,
    pub decomposition: InformationDecomposition,
    pub best_restart: usize,
    pub restarts: Vec<RestartSummary>,
    pub seed: u64,
    /// The ensemble has zero Bregman information (all members equal).
    pub degenerate: bool,
}

impl ClusteringReport {
    pub fn centroids(&self) -> &[Distribution] {
        &self.decomposition.centroids
    }

    pub fn restart_objectives(&self) -> Vec<f64> {
        self.restarts.iter().map(|r| r.explained_fraction).collect()
    }

    /// Centroids for a `k + 1` warm start: these centroids plus the member
    /// with the largest divergence from its own centroid (lowest index on ties).
    pub fn split_init(&self, geom: &Geometry<'_>, ensemble: &WeightedEnsemble) -> Result<Vec<Distribution>> {
        let mut far = 0;
        let mut best = f64::NEG_INFINITY;
        for (a, p) in ensemble.members().iter().enumerate() {
            let d = geom.divergence(p, &self.decomposition.centroids[self.best.assignments[a]])?;
            if d > best {
                best = d;
                far = a;
            }
        }
        let mut init = self.decomposition.centroids.clone();
        init.push(ensemble.members()[far].clone());
        Ok(init)
    }
}

/// Refills empty clusters. For each empty cluster (lowest index first), the
/// member farthest from its own centroid among clusters with more than one
/// member moves there; ties go to the lowest member index. The moved
/// member's divergence becomes 0, since it becomes that cluster's centroid.
/// Returns the `(member, cluster)` moves.
pub fn empty_cluster_repair(assignments: &mut [usize], divergences: &mut [f64], k: usize) -> Vec<(usize, usize)> {
    let mut sizes = vec![0usize; k];
    for &c in assignments.iter() {
        sizes[c] += 1;
    }
    let mut moves = Vec::new();
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut pick: Option<usize> = None;
        for (a, &c) in assignments.iter().enumerate() {
            if sizes[c] > 1 && pick.is_none_or(|b| divergences[a] > divergences[b]) {
                pick = Some(a);
            }
        }
        let Some(a) = pick else { break };
        sizes[assignments[a]] -= 1;
        sizes[empty] = 1;
        assignments[a] = empty;
        divergences[a] = 0.0;
        moves.push((a, empty));
    }
    moves
}

fn anchors(geom: &Geometry<'_>, centroids: &[Distribution]) -> Result<Vec<Anchor>> {
    centroids.iter().map(|c| geom.anchor(c)).collect()
}

fn run_restart(
    geom: &Geometry<'_>,
    ensemble: &WeightedEnsemble,
    points: &[Point],
    total: f64,
    cfg: &KMeansConfig,
    mut centroids: Vec<Distribution>,
) -> Result<RestartSummary> {
    let m = ensemble.len();
    let k = cfg.k;
    let members = ensemble.members();
    let w = ensemble.weights();
    let mut current = anchors(geom, &centroids)?;
    let mut assignments = vec![usize::MAX; m];
    let mut history = Vec::new();
    let mut prev = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let mut next = vec![0usize; m];
        let mut div = vec![0.0; m];
        for a in 0..m {
            let mut best = f64::INFINITY;
            for (c, anchor) in current.iter().enumerate() {
                let d = geom.divergence_prepared(&members[a], &points[a], anchor)?;
                if d < best {
                    best = d;
                    next[a] = c;
                }
            }
            div[a] = best;
        }
        for (a, c) in empty_cluster_repair(&mut next, &mut div, k) {
            centroids[c] = members[a].clone();
        }
        history.push(w.iter().zip(&div).map(|(wa, d)| wa * d).sum());
        let changed = next != assignments;
        assignments = next;

        let mut groups = vec![Vec::new(); k];
        for (a, &c) in assignments.iter().enumerate() {
            groups[c].push(a);
        }
        centroids = groups.iter().map(|g| cluster_mean(ensemble, g)).collect();
        current = anchors(geom, &centroids)?;
        let mut within = 0.0;
        for a in 0..m {
            within += w[a] * geom.divergence_prepared(&members[a], &points[a], &current[assignments[a]])?;
        }
        history.push(within);
        if !changed || prev - within < MIN_DECREASE {
            converged = true;
            break;
        }
        prev = within;
    }
    let within = *history.last().unwrap_or(&0.0);
    let explained_fraction = if total > 0.0 { (1.0 - within / total).clamp(0.0, 1.0) } else { 0.0 };
    Ok(RestartSummary { explained_fraction, within, iterations, converged, history, assignments })
}

/// Bregman k-means with `n_restarts` random initializations (k distinct
/// members as starting centroids). Assignment ties go to the lowest cluster
/// index. Returns the restart with the largest explained fraction, earliest
/// restart on ties. Restarts are independent tasks with their own seeded
/// streams, so the report does not depend on the execution mode.
pub fn bregman_kmeans(geom: &Geometry<'_>, ensemble: &WeightedEnsemble, cfg: KMeansConfig) -> Result<ClusteringReport> {
    bregman_kmeans_with_inits(geom, ensemble, cfg, &[])
}

/// As [`bregman_kmeans`], with extra restarts from the given centroid sets,
/// run after the random ones.
pub fn bregman_kmeans_with_inits(
    geom: &Geometry<'_>,
    ensemble: &WeightedEnsemble,
    cfg: KMeansConfig,
    inits: &[Vec<Distribution>],
) -> Result<ClusteringReport> {
    let m = ensemble.len();
    if cfg.k == 0 || cfg.k > m {
        return Err(Error::InvalidConfig(format!("k = {} must lie in [1, {m}]", cfg.k)));
    }
    if cfg.n_restarts == 0 || cfg.max_iters == 0 {
        return Err(Error::InvalidConfig("restarts and max_iters must be positive".into()));
    }
    let points: Vec<Point> = ensemble.members().iter().map(|p| geom.point(p)).collect::<Result<_>>()?;
    let total = geom.bregman_information(ensemble)?.value;

    for init in inits {
        if init.len() != cfg.k {
            return Err(Error::InvalidConfig(format!(
                "initial centroid set has {} entries, expected {}",
                init.len(),
                cfg.k
            )));
        }
        if let Some(c) = init.iter().find(|c| c.dim() != ensemble.dim()) {
            return Err(Error::DimensionMismatch { expected: ensemble.dim(), got: c.dim() });
        }
    }
    let restarts = try_map_indices(cfg.exec, cfg.n_restarts + inits.len(), |r| {
        let centroids = if r < cfg.n_restarts {
            let mut rng = task_rng(cfg.seed, r as u64);
            sample(&mut rng, m, cfg.k).iter().map(|a| ensemble.members()[a].clone()).collect()
        } else {
            inits[r - cfg.n_restarts].clone()
        };
        run_restart(geom, ensemble, &points, total, &cfg, centroids)
    })?;
    let mut best_restart = 0;
    for (r, s) in restarts.iter().enumerate() {
        if s.explained_fraction > restarts[best_restart].explained_fraction {
            best_restart = r;
        }
    }
    let assignments = restarts[best_restart].assignments.clone();
    let decomposition = information_decomposition(geom, ensemble, &assignments, cfg.k)?;
    let best = Partition { assignments, k: cfg.k, explained_fraction: decomposition.explained_fraction() };
    Ok(ClusteringReport { best, decomposition, best_restart, restarts, seed: cfg.seed, degenerate: !(total > 0.0) })
}
