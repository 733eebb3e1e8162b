use serde::{Deserialize, Serialize};

use crate::clustering::{adjusted_mutual_information, bregman_kmeans_with_inits, ClusteringReport, KMeansConfig};
use crate::error::{Error, Result};
use crate::info::{Geometry, OrderParameter};
use crate::par::{try_map_indices, Execution};
use crate::rng::{derive_seed, task_rng};
use crate::similarity::{similarity_from_metric, DistanceMatrix, SimilarityMatrix};
use crate::simplex::{sample_group_distribution_with, Distribution, WeightedEnsemble};
use crate::stats::median;

pub const DEFAULT_LAYOUT_JSON: &str = include_str!("../../data/planted_layout.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedGroup {
    pub name: String,
    pub points: Vec<[i64; 2]>,
}

/// Elements on the integer lattice in three groups. The first two groups
/// must be closer to each other than either is to the third.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedLayout {
    pub groups: Vec<PlantedGroup>,
}

fn manhattan(a: [i64; 2], b: [i64; 2]) -> f64 {
    ((a[0] - b[0]).abs() + (a[1] - b[1]).abs()) as f64
}

impl PlantedLayout {
    pub fn from_json(s: &str) -> Result<Self> {
        let layout: Self = serde_json::from_str(s)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.len() != 3 {
            return Err(Error::InvalidConfig(format!("layout needs 3 groups, found {}", self.groups.len())));
        }
        if self.groups.iter().any(|g| g.points.is_empty()) {
            return Err(Error::InvalidConfig("empty group in layout".into()));
        }
        let mut all: Vec<[i64; 2]> = self.groups.iter().flat_map(|g| g.points.iter().copied()).collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("layout points must be distinct".into()));
        }
        let ts = self.group_distance(0, 1);
        if ts >= self.group_distance(0, 2) || ts >= self.group_distance(1, 2) {
            return Err(Error::InvalidConfig("first two groups must be mutually closer than to the third".into()));
        }
        Ok(())
    }

    /// Mean Manhattan distance between points of two groups.
    pub fn group_distance(&self, a: usize, b: usize) -> f64 {
        let (ga, gb) = (&self.groups[a].points, &self.groups[b].points);
        let total: f64 = ga.iter().flat_map(|&p| gb.iter().map(move |&q| manhattan(p, q))).sum();
        total / (ga.len() * gb.len()) as f64
    }

    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self) -> Vec<[i64; 2]> {
        self.groups.iter().flat_map(|g| g.points.iter().copied()).collect()
    }

    /// Element indices of each group.
    pub fn group_indices(&self) -> Vec<Vec<usize>> {
        let mut start = 0;
        self.groups
            .iter()
            .map(|g| {
                let idx = (start..start + g.points.len()).collect();
                start += g.points.len();
                idx
            })
            .collect()
    }

    pub fn manhattan_distances(&self) -> Result<DistanceMatrix> {
        let pts: Vec<Vec<f64>> = self.points().iter().map(|p| vec![p[0] as f64, p[1] as f64]).collect();
        DistanceMatrix::from_points(&pts, |a, b| a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum())
    }

    /// `exp(-d)` on Manhattan distances, certified positive definite.
    pub fn structure(&self) -> Result<SimilarityMatrix> {
        similarity_from_metric(&self.manhattan_distances()?, 1.0)?.certified()
    }
}

impl Default for PlantedLayout {
    fn default() -> Self {
        Self::from_json(DEFAULT_LAYOUT_JSON).expect("bundled layout is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub layout: PlantedLayout,
    pub m_values: Vec<usize>,
    pub per_group: usize,
    pub runs: usize,
    pub lambda: f64,
    pub k_min: usize,
    pub k_max: usize,
    pub alpha: f64,
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub exec: Execution,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        Self {
            layout: PlantedLayout::default(),
            m_values: vec![2, 4, 8, 16],
            per_group: 10,
            runs: 50,
            lambda: 0.05,
            k_min: 2,
            k_max: 6,
            alpha: 2.0,
            restarts: 100,
            max_iters: 500,
            seed: 0,
            exec: Execution::Parallel,
        }
    }
}

impl PlantedConfig {
    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let bad = |s: &str| Err(Error::InvalidConfig(s.into()));
        if self.m_values.is_empty() || self.m_values.contains(&0) {
            return bad("m_values must be nonempty and positive");
        }
        if self.per_group == 0 || self.runs == 0 || self.restarts == 0 || self.max_iters == 0 {
            return bad("per_group, runs, restarts and max_iters must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad("lambda must lie in (0, 1]");
        }
        if self.k_min < 1 || self.k_min > self.k_max || self.k_max > 3 * self.per_group {
            return bad("need 1 <= k_min <= k_max <= number of distributions");
        }
        if self.k_min > 2 || self.k_max < 3 {
            return bad("k range must include 2 and 3");
        }
        OrderParameter::new(self.alpha)?.require_divergence_regime()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedRun {
    pub m: usize,
    pub run: usize,
    /// Explained fraction of the best partition for each k in `k_min..=k_max`.
    pub explained: Vec<f64>,
    pub ami_k2: f64,
    pub ami_k3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedSummary {
    pub m: usize,
    pub median_explained: Vec<f64>,
    pub median_ami_k2: f64,
    pub median_ami_k3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedReport {
    pub use_structure: bool,
    pub config: PlantedConfig,
    pub runs: Vec<PlantedRun>,
    pub summary: Vec<PlantedSummary>,
}

impl PlantedReport {
    pub fn summary_for(&self, m: usize) -> Option<&PlantedSummary> {
        self.summary.iter().find(|s| s.m == m)
    }

    /// Plot-ready rows: `m,run,k,explained`.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("m,run,k,explained_fraction\n");
        for r in &self.runs {
            for (i, e) in r.explained.iter().enumerate() {
                out.push_str(&format!("{},{},{},{}\n", r.m, r.run, self.config.k_min + i, crate::io::format_f64(*e)));
            }
        }
        out
    }
}

/// One run's sampled ensemble and ground-truth group of each member.
pub fn sample_run(cfg: &PlantedConfig, m: usize, task: u64) -> Result<(WeightedEnsemble, Vec<usize>)> {
    let n = cfg.layout.len();
    let u = Distribution::uniform(n)?;
    let mut rng = task_rng(cfg.seed, task);
    let mut members = Vec::new();
    let mut truth = Vec::new();
    for (g, idx) in cfg.layout.group_indices().iter().enumerate() {
        for _ in 0..cfg.per_group {
            let p = sample_group_distribution_with(&mut rng, idx, m, n)?;
            members.push(crate::simplex::smooth_to_interior(&p, cfg.lambda, &u)?);
            truth.push(g);
        }
    }
    Ok((WeightedEnsemble::uniform(members)?, truth))
}

fn cluster_chain(
    geom: &Geometry<'_>,
    ensemble: &WeightedEnsemble,
    cfg: &PlantedConfig,
    seed: u64,
) -> Result<Vec<ClusteringReport>> {
    let mut out: Vec<ClusteringReport> = Vec::new();
    for k in cfg.k_min..=cfg.k_max {
        let kcfg = KMeansConfig {
            k,
            n_restarts: cfg.restarts,
            max_iters: cfg.max_iters,
            seed: derive_seed(seed, k as u64),
            exec: Execution::Serial,
        };
        let inits = match out.last() {
            Some(prev) => vec![prev.split_init(geom, ensemble)?],
            None => Vec::new(),
        };
        out.push(bregman_kmeans_with_inits(geom, ensemble, kcfg, &inits)?);
    }
    Ok(out)
}

/// Runs every `(m, run)` pair. The sampled data depend only on the seed, so
/// the structured and structure-blind reports see identical ensembles.
pub fn run_planted_experiment(cfg: &PlantedConfig, use_structure: bool) -> Result<PlantedReport> {
    cfg.validate()?;
    let n = cfg.layout.len();
    let z = if use_structure { cfg.layout.structure()? } else { SimilarityMatrix::identity(n) };
    let geom = Geometry::new(&z, OrderParameter::new(cfg.alpha)?)?;
    let k2_truth = |g: &usize| usize::from(*g == 2);

    let tasks = cfg.m_values.len() * cfg.runs;
    let runs = try_map_indices(cfg.exec, tasks, |t| {
        let (mi, run) = (t / cfg.runs, t % cfg.runs);
        let m = cfg.m_values[mi];
        let (ensemble, truth) = sample_run(cfg, m, t as u64)?;
        let chain = cluster_chain(&geom, &ensemble, cfg, derive_seed(cfg.seed, (1 << 32) + t as u64))?;
        let at = |k: usize| &chain[k - cfg.k_min].best.assignments;
        let t2: Vec<usize> = truth.iter().map(k2_truth).collect();
        Ok::<_, Error>(PlantedRun {
            m,
            run,
            explained: chain.iter().map(|c| c.best.explained_fraction).collect(),
            ami_k2: adjusted_mutual_information(at(2), &t2)?,
            ami_k3: adjusted_mutual_information(at(3), &truth)?,
        })
    })?;

    let summary = cfg
        .m_values
        .iter()
        .map(|&m| {
            let rs: Vec<&PlantedRun> = runs.iter().filter(|r| r.m == m).collect();
            let col = |f: &dyn Fn(&PlantedRun) -> f64| median(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            PlantedSummary {
                m,
                median_explained: (0..=cfg.k_max - cfg.k_min).map(|i| col(&|r| r.explained[i])).collect(),
                median_ami_k2: col(&|r| r.ami_k2),
                median_ami_k3: col(&|r| r.ami_k3),
            }
        })
        .collect();
    Ok(PlantedReport { use_structure, config: cfg.clone(), runs, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PlantedConfig {
        PlantedConfig { m_values: vec![2, 16], runs: 3, restarts: 5, seed: 7, ..Default::default() }
    }

    #[test]
    fn bundled_layout() {
        let l = PlantedLayout::default();
        assert_eq!(l.len(), 60);
        assert!(l.groups.iter().all(|g| g.points.len() == 20));
        assert!(l.structure().unwrap().is_certified());
    }

    #[test]
    fn layout_rejects_wrong_geometry() {
        let mut l = PlantedLayout::default();
        l.groups.swap(1, 2);
        assert!(l.validate().is_err());
        let mut l = PlantedLayout::default();
        l.groups[1].points[0] = l.groups[0].points[0];
        assert!(l.validate().is_err());
    }

    #[test]
    fn sampled_members_smoothed_and_grouped() {
        let cfg = small();
        let (e, truth) = sample_run(&cfg, 4, 0).unwrap();
        assert_eq!(e.len(), 30);
        assert_eq!(truth.iter().filter(|&&g| g == 1).count(), 10);
        for (p, &g) in e.members().iter().zip(&truth) {
            assert!(p.iter().all(|&x| x >= 0.05 / 60.0 - 1e-15));
            let inside: f64 = cfg.layout.group_indices()[g].iter().map(|&i| p[i]).sum();
            assert!((inside - (0.95 + 0.05 / 3.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn explained_fraction_monotone_in_k() {
        for s in [true, false] {
            let r = run_planted_experiment(&small(), s).unwrap();
            for run in &r.runs {
                assert!(run.explained.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{:?}", run.explained);
            }
        }
    }

    #[test]
    fn reproducible_across_execution_modes() {
        let a = run_planted_experiment(&small(), true).unwrap();
        let b = run_planted_experiment(&PlantedConfig { exec: Execution::Serial, ..small() }, true).unwrap();
        assert_eq!(a.runs, b.runs);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn invalid_configs() {
        assert!(run_planted_experiment(&PlantedConfig { lambda: 0.0, ..small() }, true).is_err());
        assert!(run_planted_experiment(&PlantedConfig { k_max: 2, ..small() }, true).is_err());
        assert!(run_planted_experiment(&PlantedConfig { m_values: vec![], ..small() }, true).is_err());
    }
}
