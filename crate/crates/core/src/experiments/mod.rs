//! Reproduction harness: planted partitions, runtime against exact optimal
//! transport, and null-model β-diversity.

pub mod beta;
pub mod planted;
pub mod runtime;

pub use beta::{
    load_rutor, run_beta_diversity, run_rutor_analysis, rutor_similarity, BetaDiversity, BetaDiversityReport,
    RutorData, StageResult,
};
pub use planted::{run_planted_experiment, PlantedConfig, PlantedLayout, PlantedReport, PlantedRun, PlantedSummary};
pub use runtime::{run_runtime_experiment, RuntimeConfig, RuntimeReport, RuntimeRun, RuntimeSummary, Sampler};
