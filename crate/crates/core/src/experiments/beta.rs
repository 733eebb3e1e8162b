use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{Geometry, OrderParameter};
use crate::io::{read_abundance_csv, AbundanceTable};
use crate::par::{try_map_indices, Execution};
use crate::rng::{derive_seed, task_rng};
use crate::similarity::{similarity_linear_from_metric, DistanceMatrix, SimilarityMatrix};
use crate::simplex::{Distribution, WeightedEnsemble};

/// Where the bundled tables live.
pub const DEFAULT_DATA_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data/rutor");

/// Floor applied to abundance rows before any divergence is taken.
pub const ABUNDANCE_FLOOR: f64 = 1e-10;

/// Standardized traits, Euclidean distances rescaled to a maximum of 1, and
/// `Z = 1 - D`. Certified when positive definite, returned uncertified
/// otherwise (for example when two species share all traits).
pub fn rutor_similarity(traits: &DMatrix<f64>) -> Result<SimilarityMatrix> {
    let (n, t) = traits.shape();
    if n < 2 || t == 0 {
        return Err(Error::EmptyDimension);
    }
    let mut std = traits.clone();
    for j in 0..t {
        let col = traits.column(j);
        let mean = col.mean();
        let sd = (col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::InvalidConfig(format!("trait column {j} is constant")));
        }
        std.column_mut(j).iter_mut().for_each(|x| *x = (*x - mean) / sd);
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| std.row(i).iter().copied().collect()).collect();
    let d =
        DistanceMatrix::from_points(&rows, |a, b| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())?;
    similarity_linear_from_metric(&d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: String,
    pub plots: usize,
    pub empirical: f64,
    pub null: Vec<f64>,
    /// Percentage of null samples strictly below the empirical value.
    pub percentile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaDiversity {
    pub alpha: f64,
    pub n_null: usize,
    pub stages: Vec<StageResult>,
}

impl BetaDiversity {
    pub fn stage(&self, name: &str) -> Option<&StageResult> {
        self.stages.iter().find(|s| s.stage == name)
    }

    /// Empirical value of `stage` over that of `reference`.
    pub fn ratio(&self, stage: &str, reference: &str) -> Option<f64> {
        Some(self.stage(stage)?.empirical / self.stage(reference)?.empirical)
    }
}

/// Bregman information of each stage's plots under uniform weights, against
/// a null of `n_null` random stages of equal size drawn without replacement
/// from all plots. Stages are reported in order of first appearance. Plots
/// are put in a canonical order (by id) before sampling, so the result does
/// not depend on row order.
pub fn run_beta_diversity(
    abundances: &AbundanceTable,
    stage_labels: &[String],
    z: &SimilarityMatrix,
    alpha: f64,
    n_null: usize,
    seed: u64,
    exec: Execution,
) -> Result<BetaDiversity> {
    let n_plots = abundances.plots.len();
    if stage_labels.len() != n_plots {
        return Err(Error::DimensionMismatch { expected: n_plots, got: stage_labels.len() });
    }
    if z.dim() != abundances.species.len() {
        return Err(Error::DimensionMismatch { expected: abundances.species.len(), got: z.dim() });
    }
    if n_null == 0 {
        return Err(Error::InvalidConfig("n_null must be at least 1".into()));
    }
    let geom = Geometry::new(z, OrderParameter::new(alpha)?)?;
    let dists = abundances.to_distributions(ABUNDANCE_FLOOR)?;
    let mut order: Vec<usize> = (0..n_plots).collect();
    order.sort_by(|&a, &b| abundances.plots[a].cmp(&abundances.plots[b]).then(a.cmp(&b)));
    let plots: Vec<&Distribution> = order.iter().map(|&i| &dists[i]).collect();
    let labels: Vec<&String> = order.iter().map(|&i| &stage_labels[i]).collect();

    let info = |idx: &[usize]| -> Result<f64> {
        let members = idx.iter().map(|&i| plots[i].clone()).collect();
        Ok(geom.bregman_information(&WeightedEnsemble::uniform(members)?)?.value)
    };

    let mut names: Vec<&String> = Vec::new();
    for s in stage_labels {
        if !names.contains(&s) {
            names.push(s);
        }
    }
    let mut stages = Vec::new();
    for name in names {
        let idx: Vec<usize> = (0..n_plots).filter(|&i| labels[i] == name).collect();
        let empirical = info(&idx)?;
        let stage_seed = derive_seed(seed, stage_seed_key(name));
        let null = try_map_indices(exec, n_null, |j| {
            let mut rng = task_rng(stage_seed, j as u64);
            info(&sample(&mut rng, n_plots, idx.len()).into_vec())
        })?;
        let below = null.iter().filter(|&&v| v < empirical).count();
        stages.push(StageResult {
            stage: name.clone(),
            plots: idx.len(),
            empirical,
            percentile: 100.0 * below as f64 / n_null as f64,
            null,
        });
    }
    Ok(BetaDiversity { alpha, n_null, stages })
}

/// Stable per-stage stream key from the stage name (FNV-1a).
fn stage_seed_key(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Bundled Rutor tables. Species columns of the abundance table and rows of
/// the trait table are aligned by name.
#[derive(Debug, Clone)]
pub struct RutorData {
    pub abundance: AbundanceTable,
    pub stages: Vec<String>,
    pub traits: DMatrix<f64>,
    pub trait_names: Vec<String>,
}

fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = rdr.headers()?.iter().map(str::to_owned).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok((header, rows))
}

/// Reads `abundance.csv` (plot, species...), `stages.csv` (plot, stage) and
/// `traits.csv` (species, trait...) from `dir`.
pub fn load_rutor(dir: &Path) -> Result<RutorData> {
    let path = dir.join("abundance.csv");
    let abundance =
        read_abundance_csv(std::fs::File::open(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?)?;

    let (_, stage_rows) = read_csv_rows(&dir.join("stages.csv"))?;
    let by_plot: HashMap<&str, &str> =
        stage_rows.iter().filter(|r| r.len() >= 2).map(|r| (r[0].as_str(), r[1].as_str())).collect();
    let stages = abundance
        .plots
        .iter()
        .map(|p| {
            by_plot
                .get(p.as_str())
                .map(|s| s.to_string())
                .ok_or_else(|| Error::Parse(format!("plot {p:?} has no stage")))
        })
        .collect::<Result<Vec<_>>>()?;

    let (header, trait_rows) = read_csv_rows(&dir.join("traits.csv"))?;
    let trait_names: Vec<String> = header.into_iter().skip(1).collect();
    let by_species: HashMap<&str, &Vec<String>> = trait_rows.iter().map(|r| (r[0].as_str(), r)).collect();
    let mut traits = DMatrix::zeros(abundance.species.len(), trait_names.len());
    for (i, sp) in abundance.species.iter().enumerate() {
        let row = by_species.get(sp.as_str()).ok_or_else(|| Error::Parse(format!("species {sp:?} has no traits")))?;
        if row.len() != trait_names.len() + 1 {
            return Err(Error::Parse(format!("traits for {sp:?}: expected {} fields", trait_names.len() + 1)));
        }
        for j in 0..trait_names.len() {
            traits[(i, j)] = row[j + 1].parse().map_err(|_| {
                Error::Parse(format!("traits for {sp:?}, column {}: bad number {:?}", j + 1, row[j + 1]))
            })?;
        }
    }
    Ok(RutorData { abundance, stages, traits, trait_names })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaDiversityReport {
    pub taxonomic: BetaDiversity,
    pub functional: BetaDiversity,
    pub functional_min_eigenvalue: f64,
    /// Per stage: whether the functional value is at most the taxonomic one.
    /// Reported, not asserted.
    pub structure_lowers_information: Vec<(String, bool)>,
}

pub fn run_rutor_analysis(
    data: &RutorData,
    alpha: f64,
    n_null: usize,
    seed: u64,
    exec: Execution,
) -> Result<BetaDiversityReport> {
    let z = rutor_similarity(&data.traits)?.certified()?;
    let eye = SimilarityMatrix::identity(data.abundance.species.len());
    let taxonomic = run_beta_diversity(&data.abundance, &data.stages, &eye, alpha, n_null, seed, exec)?;
    let functional = run_beta_diversity(&data.abundance, &data.stages, &z, alpha, n_null, seed, exec)?;
    let structure_lowers_information = taxonomic
        .stages
        .iter()
        .zip(&functional.stages)
        .map(|(t, f)| (t.stage.clone(), f.empirical <= t.empirical))
        .collect();
    Ok(BetaDiversityReport {
        taxonomic,
        functional,
        functional_min_eigenvalue: z.certificate().map_or(f64::NAN, |c| c.min_eigenvalue),
        structure_lowers_information,
    })
}
