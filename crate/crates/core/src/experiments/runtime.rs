use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{all_pairs_jbd_fast, all_pairs_jbd_naive, OrderParameter};
use crate::ot::all_pairs_wasserstein;
use crate::par::Execution;
use crate::rng::task_rng;
use crate::similarity::{similarity_from_metric, DistanceMatrix};
use crate::simplex::{sample_uniform_simplex_with, Distribution};
use crate::stats::{kendall_tau_b, median, pearson};

/// Largest entrywise gap tolerated between the fast and naive routes.
pub const FAST_NAIVE_TOLERANCE: f64 = 1e-10;

/// How the input distributions are drawn.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampler {
    /// Uniform on the simplex (flat Dirichlet).
    #[default]
    FlatDirichlet,
    /// Independent uniform entries, normalized. Not uniform on the simplex;
    /// kept for sensitivity checks.
    NormalizedUniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeConfig {
    pub support: usize,
    pub embedding_dim: usize,
    pub alpha: f64,
    pub sizes: Vec<usize>,
    pub runs: usize,
    #[serde(default)]
    pub sampler: Sampler,
    pub seed: u64,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            support: 50,
            embedding_dim: 10,
            alpha: 2.0,
            sizes: vec![10, 25, 50, 100, 200],
            runs: 5,
            sampler: Sampler::FlatDirichlet,
            seed: 0,
        }
    }
}

impl RuntimeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.support < 2 || self.embedding_dim == 0 || self.runs == 0 {
            return Err(Error::InvalidConfig("support >= 2, embedding_dim >= 1 and runs >= 1 required".into()));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&s| s < 3) {
            return Err(Error::InvalidConfig("sizes must be nonempty and at least 3".into()));
        }
        OrderParameter::new(self.alpha)?.require_divergence_regime()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeRun {
    pub size: usize,
    pub run: usize,
    pub ot_seconds: f64,
    pub naive_seconds: f64,
    pub fast_seconds: f64,
    pub max_fast_naive_diff: f64,
    pub pearson: f64,
    pub kendall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeSummary {
    pub size: usize,
    pub median_ot_seconds: f64,
    pub median_naive_seconds: f64,
    pub median_fast_seconds: f64,
    /// Median OT time over median naive time.
    pub naive_speedup: f64,
    pub median_pearson: f64,
    pub median_kendall: f64,
    pub max_fast_naive_diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeReport {
    pub config: RuntimeConfig,
    pub runs: Vec<RuntimeRun>,
    pub summary: Vec<RuntimeSummary>,
}

impl RuntimeReport {
    /// Plot-ready rows: `size,run,method,seconds`.
    pub fn timings_csv(&self) -> String {
        let mut out = String::from("size,run,method,seconds\n");
        for r in &self.runs {
            for (name, t) in [("ot", r.ot_seconds), ("jbd_naive", r.naive_seconds), ("jbd_fast", r.fast_seconds)] {
                out.push_str(&format!("{},{},{name},{}\n", r.size, r.run, crate::io::format_f64(t)));
            }
        }
        out
    }
}

/// Random embedding in the unit cube and `size` random distributions.
pub fn sample_instance(cfg: &RuntimeConfig, size: usize, task: u64) -> Result<(DistanceMatrix, Vec<Distribution>)> {
    let mut rng = task_rng(cfg.seed, task);
    let points: Vec<Vec<f64>> =
        (0..cfg.support).map(|_| (0..cfg.embedding_dim).map(|_| rng.random::<f64>()).collect()).collect();
    let d = DistanceMatrix::from_points(&points, |a, b| {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    })?;
    let members = (0..size)
        .map(|_| match cfg.sampler {
            Sampler::FlatDirichlet => sample_uniform_simplex_with(&mut rng, cfg.support),
            Sampler::NormalizedUniform => {
                let raw: Vec<f64> = (0..cfg.support).map(|_| rng.random::<f64>()).collect();
                Distribution::from_counts(&raw)
            }
        })
        .collect::<Result<_>>()?;
    Ok((d, members))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let out = f()?;
    Ok((out, start.elapsed().as_secs_f64()))
}

/// Times the three all-pairs routes on one thread, one run at a time.
/// Errors if fast and naive disagree beyond [`FAST_NAIVE_TOLERANCE`].
pub fn run_runtime_experiment(cfg: &RuntimeConfig) -> Result<RuntimeReport> {
    cfg.validate()?;
    let alpha = OrderParameter::new(cfg.alpha)?;
    let mut runs = Vec::new();
    for (si, &size) in cfg.sizes.iter().enumerate() {
        for run in 0..cfg.runs {
            let (d, members) = sample_instance(cfg, size, (si * cfg.runs + run) as u64)?;
            let z = similarity_from_metric(&d, 1.0)?.certified()?;
            let (ot, ot_seconds) = timed(|| all_pairs_wasserstein(&d, &members, Execution::Serial))?;
            let (naive, naive_seconds) = timed(|| all_pairs_jbd_naive(&z, alpha, &members, Execution::Serial))?;
            let (fast, fast_seconds) = timed(|| all_pairs_jbd_fast(&z, alpha, &members, Execution::Serial))?;
            let diff = fast.max_abs_diff(&naive);
            if !(diff <= FAST_NAIVE_TOLERANCE) {
                return Err(Error::Inconsistent(format!("fast and naive routes differ by {diff:e} at size {size}")));
            }
            let (x, y) = (ot.upper_triangle(), naive.upper_triangle());
            runs.push(RuntimeRun {
                size,
                run,
                ot_seconds,
                naive_seconds,
                fast_seconds,
                max_fast_naive_diff: diff,
                pearson: pearson(&x, &y)?,
                kendall: kendall_tau_b(&x, &y)?,
            });
        }
    }
    let summary = cfg
        .sizes
        .iter()
        .map(|&size| {
            let rs: Vec<&RuntimeRun> = runs.iter().filter(|r| r.size == size).collect();
            let col = |f: fn(&RuntimeRun) -> f64| median(&rs.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (ot, naive) = (col(|r| r.ot_seconds), col(|r| r.naive_seconds));
            RuntimeSummary {
                size,
                median_ot_seconds: ot,
                median_naive_seconds: naive,
                median_fast_seconds: col(|r| r.fast_seconds),
                naive_speedup: ot / naive,
                median_pearson: col(|r| r.pearson),
                median_kendall: col(|r| r.kendall),
                max_fast_naive_diff: rs.iter().map(|r| r.max_fast_naive_diff).fold(0.0, f64::max),
            }
        })
        .collect();
    Ok(RuntimeReport { config: cfg.clone(), runs, summary })
}
