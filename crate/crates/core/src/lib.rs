//! Structure-aware information measures on the probability simplex.
//!
//! Elements of a finite set are related through a similarity matrix `Z`.
//! The entropy of order `alpha` built on `Z` is strictly concave for
//! `alpha >= 2` and positive definite `Z`; its Bregman divergence,
//! Jensen-Bregman divergence and Bregman information drive a k-means style
//! clustering of distributions. Around that core the crate provides the
//! constructions of positive definite similarity matrices, an exact
//! Wasserstein-1 solver used as a baseline, and reproducible experiment
//! drivers.
//!
//! Data-parallel loops (all-pairs matrices, clustering restarts, experiment
//! runs) use rayon behind the default `parallel` feature; every such entry
//! point takes an [`Execution`] so callers can force serial execution.
//!
//! ```
//! use structdiv::clustering::{bregman_kmeans, KMeansConfig};
//! use structdiv::{Distribution, Geometry, OrderParameter, SimilarityMatrix, WeightedEnsemble};
//!
//! # fn main() -> structdiv::Result<()> {
//! let z = SimilarityMatrix::from_rows(&[
//!     vec![1.0, 0.6, 0.1],
//!     vec![0.6, 1.0, 0.1],
//!     vec![0.1, 0.1, 1.0],
//! ])?
//! .certified()?;
//! let geom = Geometry::new(&z, OrderParameter::new(2.0)?)?;
//! let p = Distribution::new(vec![0.7, 0.2, 0.1])?;
//! let q = Distribution::new(vec![0.1, 0.2, 0.7])?;
//! assert!(geom.divergence(&p, &q)? > 0.0);
//!
//! let ensemble = WeightedEnsemble::uniform(vec![p, q])?;
//! let report = bregman_kmeans(&geom, &ensemble, KMeansConfig::new(2, 42))?;
//! assert!((report.best.explained_fraction - 1.0).abs() < 1e-12);
//! # Ok(())
//! # }
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod experiments;
pub mod info;
pub mod io;
pub mod ot;
pub mod par;
pub mod rng;
pub mod similarity;
pub mod simplex;
pub mod stats;

pub use error::{Error, Result};
pub use info::{Geometry, OrderParameter};
pub use par::Execution;
pub use similarity::{DistanceMatrix, SimilarityMatrix};
pub use simplex::{Distribution, WeightedEnsemble};
