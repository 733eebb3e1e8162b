//! Points of the probability simplex and weighted collections of them.

use std::ops::Deref;

use rand::Rng;
use rand_distr::{Distribution as _, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::task_rng;

/// Default tolerance for [`validate_distribution`].
pub const DEFAULT_SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Default floor used to push boundary distributions into the interior.
pub const DEFAULT_INTERIOR_FLOOR: f64 = 1e-10;

/// A probability vector: nonnegative entries summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates with [`DEFAULT_SIMPLEX_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        validate_distribution(&probs, DEFAULT_SIMPLEX_TOLERANCE)
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyDimension);
        }
        Ok(Self { probs: vec![1.0 / n as f64; n] })
    }

    /// Normalizes nonnegative counts or weights.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyDimension);
        }
        for (index, &c) in counts.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if c < 0.0 {
                return Err(Error::NegativeEntry { index, value: c });
            }
        }
        let total: f64 = counts.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotNormalized { sum: total, tolerance: 0.0 });
        }
        Ok(Self { probs: counts.iter().map(|c| c / total).collect() })
    }

    pub(crate) fn from_raw_unchecked(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn dim(&self) -> usize {
        self.probs.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    /// All entries strictly positive.
    pub fn is_interior(&self) -> bool {
        self.probs.iter().all(|&x| x > 0.0)
    }

    /// All entries at least `floor`.
    pub fn is_interior_with(&self, floor: f64) -> bool {
        self.probs.iter().all(|&x| x >= floor)
    }

    pub fn check_interior(&self) -> Result<()> {
        match self.probs.iter().position(|&x| x <= 0.0) {
            Some(index) => Err(Error::NotInterior { index, value: self.probs[index] }),
            None => Ok(()),
        }
    }

    /// Entrywise midpoint `(self + other) / 2`.
    pub fn midpoint(&self, other: &Distribution) -> Result<Distribution> {
        check_same_dim(self, other)?;
        Ok(Self::from_raw_unchecked(self.probs.iter().zip(&other.probs).map(|(a, b)| 0.5 * (a + b)).collect()))
    }
}

impl Deref for Distribution {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.probs
    }
}

impl TryFrom<Vec<f64>> for Distribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Distribution::new(v)
    }
}

impl From<Distribution> for Vec<f64> {
    fn from(d: Distribution) -> Self {
        d.probs
    }
}

fn check_same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

fn renormalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Accepts `v` if it lies within `tolerance` of the simplex; clips small
/// negatives to zero and renormalizes.
pub fn validate_distribution(v: &[f64], tolerance: f64) -> Result<Distribution> {
    if v.is_empty() {
        return Err(Error::EmptyDimension);
    }
    for (index, &x) in v.iter().enumerate() {
        if !x.is_finite() {
            return Err(Error::NonFinite { index });
        }
        if x < -tolerance {
            return Err(Error::NegativeEntry { index, value: x });
        }
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > tolerance {
        return Err(Error::NotNormalized { sum, tolerance });
    }
    let clipped: Vec<f64> = v.iter().map(|&x| x.max(0.0)).collect();
    Ok(Distribution { probs: renormalize(clipped) })
}

/// Mixes `p` towards `u`: `(1 - lambda) p + lambda u`.
pub fn smooth_to_interior(p: &Distribution, lambda: f64, u: &Distribution) -> Result<Distribution> {
    check_same_dim(p, u)?;
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::ParameterOutOfRange { name: "lambda", value: lambda, reason: "must lie in (0, 1]" });
    }
    if lambda == 1.0 {
        return Ok(u.clone());
    }
    let mixed = p.iter().zip(u.iter()).map(|(a, b)| (1.0 - lambda) * a + lambda * b).collect();
    Ok(Distribution { probs: renormalize(mixed) })
}

/// Raises every entry below `epsilon` to `epsilon`, then renormalizes.
pub fn floor_to_interior(p: &Distribution, epsilon: f64) -> Result<Distribution> {
    let n = p.dim() as f64;
    if !(epsilon > 0.0 && epsilon < 1.0 / n) {
        return Err(Error::ParameterOutOfRange { name: "epsilon", value: epsilon, reason: "must lie in (0, 1/n)" });
    }
    if p.iter().all(|&x| x >= epsilon) {
        return Ok(p.clone());
    }
    let raised = p.iter().map(|&x| x.max(epsilon)).collect();
    Ok(Distribution { probs: renormalize(raised) })
}

/// Draw from the flat Dirichlet on `n` elements using generator `rng`.
pub fn sample_uniform_simplex_with<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<Distribution> {
    if n == 0 {
        return Err(Error::EmptyDimension);
    }
    if n == 1 {
        return Ok(Distribution { probs: vec![1.0] });
    }
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    Ok(Distribution { probs: renormalize(draws) })
}

/// Seeded draw from the flat Dirichlet on `n` elements.
pub fn sample_uniform_simplex(n: usize, seed: u64) -> Result<Distribution> {
    sample_uniform_simplex_with(&mut task_rng(seed, 0), n)
}

/// Empirical distribution of `m_samples` uniform draws (with replacement)
/// from `group`, laid out on the full support of size `support_size`.
pub fn sample_group_distribution_with<R: Rng + ?Sized>(
    rng: &mut R,
    group: &[usize],
    m_samples: usize,
    support_size: usize,
) -> Result<Distribution> {
    if group.is_empty() {
        return Err(Error::Empty("group"));
    }
    if m_samples == 0 {
        return Err(Error::ParameterOutOfRange { name: "m_samples", value: 0.0, reason: "must be at least 1" });
    }
    if let Some(&bad) = group.iter().find(|&&g| g >= support_size) {
        return Err(Error::DimensionMismatch { expected: support_size, got: bad + 1 });
    }
    let mut counts = vec![0.0; support_size];
    for _ in 0..m_samples {
        counts[group[rng.random_range(0..group.len())]] += 1.0;
    }
    Distribution::from_counts(&counts)
}

pub fn sample_group_distribution(
    group: &[usize],
    m_samples: usize,
    support_size: usize,
    seed: u64,
) -> Result<Distribution> {
    sample_group_distribution_with(&mut task_rng(seed, 0), group, m_samples, support_size)
}

/// Distributions over a shared support with weights in the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    members: Vec<Distribution>,
    weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn new(members: Vec<Distribution>, weights: Vec<f64>) -> Result<Self> {
        let first = members.first().ok_or(Error::Empty("ensemble"))?;
        let n = first.dim();
        if let Some(bad) = members.iter().find(|m| m.dim() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: bad.dim() });
        }
        if weights.len() != members.len() {
            return Err(Error::DimensionMismatch { expected: members.len(), got: weights.len() });
        }
        for (index, &w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::NonFinite { index });
            }
            if w < 0.0 {
                return Err(Error::NegativeEntry { index, value: w });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized { sum, tolerance: 1e-12 });
        }
        Ok(Self { members, weights })
    }

    /// Equal weights `1/m`.
    pub fn uniform(members: Vec<Distribution>) -> Result<Self> {
        let m = members.len();
        Self::new(members, vec![1.0 / m.max(1) as f64; m])
    }

    /// Weights proportional to `raw` (e.g. population counts).
    pub fn with_raw_weights(members: Vec<Distribution>, raw: &[f64]) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NotNormalized { sum: total, tolerance: 0.0 });
        }
        Self::new(members, raw.iter().map(|w| w / total).collect())
    }

    pub fn members(&self) -> &[Distribution] {
        &self.members
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }

    /// Weighted mean `sum_a w_a p^a`.
    pub fn mean(&self) -> Distribution {
        weighted_mean(self.members.iter().zip(self.weights.iter().copied()), self.dim())
    }

    /// Smooths each member towards `u`. Smoothing is affine, so the mean of
    /// the smoothed members equals the smoothed mean of the originals.
    pub fn smooth_members(&self, lambda: f64, u: &Distribution) -> Result<Self> {
        let members = self.members.iter().map(|p| smooth_to_interior(p, lambda, u)).collect::<Result<_>>()?;
        Ok(Self { members, weights: self.weights.clone() })
    }

    /// Floors each member into the interior.
    pub fn floor_members(&self, epsilon: f64) -> Result<Self> {
        let members = self.members.iter().map(|p| floor_to_interior(p, epsilon)).collect::<Result<_>>()?;
        Ok(Self { members, weights: self.weights.clone() })
    }
}

/// Weighted average of distributions, renormalized by the total weight.
pub(crate) fn weighted_mean<'a, I>(items: I, n: usize) -> Distribution
where
    I: IntoIterator<Item = (&'a Distribution, f64)>,
{
    let mut acc = vec![0.0; n];
    let mut total = 0.0;
    for (p, w) in items {
        total += w;
        for (a, x) in acc.iter_mut().zip(p.iter()) {
            *a += w * x;
        }
    }
    if total > 0.0 {
        acc.iter_mut().for_each(|a| *a /= total);
    }
    Distribution { probs: acc }
}
