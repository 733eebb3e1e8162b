//! Structure-aware entropy and the Bregman quantities it induces.
//!
//! For a similarity matrix `Z` and order `alpha`, the ordinariness of element
//! `i` under `p` is `(Zp)_i`; the entropy is the expected surprise
//! `(1 - p'(Zp)^(alpha-1)) / (alpha-1)` (Shannon-like `-p' ln(Zp)` at
//! `alpha = 1`). For `alpha >= 2` and `Z > 0` it is strictly concave on the
//! open simplex, and its negative generates a Bregman divergence.

mod pairs;

pub use pairs::{
    all_pairs_jbd_fast, all_pairs_jbd_gram, all_pairs_jbd_midpoint, all_pairs_jbd_naive, PairwiseDissimilarityMatrix,
    PairwiseMethod,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::SimilarityMatrix;
use crate::simplex::{Distribution, WeightedEnsemble};

/// Divergence values in `[-DIVERGENCE_FLOOR, 0)` are rounding noise and are
/// reported as 0; anything more negative is an error.
pub const DIVERGENCE_FLOOR: f64 = 1e-12;

/// The order `alpha >= 0` of the entropy family.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OrderParameter(f64);

impl OrderParameter {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::ParameterOutOfRange { name: "alpha", value: alpha, reason: "must be finite and >= 0" });
        }
        Ok(Self(alpha))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Divergences and Bregman information need `alpha >= 2`.
    pub fn require_divergence_regime(self) -> Result<Self> {
        if self.0 < 2.0 {
            return Err(Error::AlphaTooSmall(self.0));
        }
        Ok(self)
    }
}

impl TryFrom<f64> for OrderParameter {
    type Error = Error;
    fn try_from(a: f64) -> Result<Self> {
        OrderParameter::new(a)
    }
}

impl From<OrderParameter> for f64 {
    fn from(a: OrderParameter) -> f64 {
        a.0
    }
}

/// `x^e` with exact fast paths for small integer exponents.
#[inline]
pub(crate) fn pow(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == 2.0 {
        x * x
    } else if e.fract() == 0.0 && e.abs() <= 8.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

fn check_dim(z: &SimilarityMatrix, p: &[f64]) -> Result<()> {
    if z.dim() != p.len() {
        return Err(Error::DimensionMismatch { expected: z.dim(), got: p.len() });
    }
    Ok(())
}

/// `Zp`: expected similarity of each element to a draw from `p`.
pub fn ordinariness(z: &SimilarityMatrix, p: &Distribution) -> Result<Vec<f64>> {
    check_dim(z, p)?;
    Ok(z.apply(p))
}

/// Surprise of an element with ordinariness `x` in `(0, 1]`.
pub fn surprise(alpha: OrderParameter, x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::ParameterOutOfRange { name: "x", value: x, reason: "ordinariness must be positive" });
    }
    let a = alpha.value();
    if a == 1.0 {
        return Ok(-x.ln());
    }
    // -(x^(a-1) - 1) / (a-1), written with expm1 so it stays accurate near a = 1
    Ok(-((a - 1.0) * x.ln()).exp_m1() / (a - 1.0))
}

/// Entropy from a precomputed ordinariness vector `s = Zp`.
pub(crate) fn entropy_from_ordinariness(alpha: f64, p: &[f64], s: &[f64]) -> Result<f64> {
    let mut acc = 0.0;
    if alpha == 1.0 {
        for (i, (&pi, &si)) in p.iter().zip(s).enumerate() {
            if pi == 0.0 {
                continue;
            }
            if !(si > 0.0) {
                return Err(Error::NonPositiveOrdinariness { index: i });
            }
            acc -= pi * si.ln();
        }
        return Ok(acc);
    }
    let e = alpha - 1.0;
    if (alpha - 1.0).abs() < 1e-3 {
        // near the Shannon limit: sum p (1 - s^e) / e via expm1
        for (i, (&pi, &si)) in p.iter().zip(s).enumerate() {
            if pi == 0.0 {
                continue;
            }
            if !(si > 0.0) {
                return Err(Error::NonPositiveOrdinariness { index: i });
            }
            acc -= pi * (e * si.ln()).exp_m1();
        }
        return Ok(acc / e);
    }
    for (i, (&pi, &si)) in p.iter().zip(s).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if !(si > 0.0) {
            return Err(Error::NonPositiveOrdinariness { index: i });
        }
        acc += pi * pow(si, e);
    }
    Ok((1.0 - acc) / e)
}

/// Structure-aware entropy of order `alpha`.
pub fn entropy(z: &SimilarityMatrix, alpha: OrderParameter, p: &Distribution) -> Result<f64> {
    check_dim(z, p)?;
    let s = z.apply(p);
    entropy_from_ordinariness(alpha.value(), p, &s)
}

fn check_smooth_regime(z: &SimilarityMatrix, alpha: OrderParameter, p: &Distribution) -> Result<f64> {
    check_dim(z, p)?;
    let a = alpha.require_divergence_regime()?.value();
    p.check_interior()?;
    Ok(a)
}

/// Gradient of the entropy in the ambient coordinates:
/// `-(Zp)^(alpha-1)/(alpha-1) - Z diag((Zp)^(alpha-2)) p`.
pub fn entropy_gradient(z: &SimilarityMatrix, alpha: OrderParameter, p: &Distribution) -> Result<DVector<f64>> {
    let a = check_smooth_regime(z, alpha, p)?;
    let s = z.apply(p);
    let d1p: Vec<f64> = p.iter().zip(&s).map(|(pi, si)| pi * pow(*si, a - 2.0)).collect();
    let zd1p = z.apply(&d1p);
    Ok(DVector::from_iterator(p.dim(), s.iter().zip(&zd1p).map(|(si, t)| -pow(*si, a - 1.0) / (a - 1.0) - t)))
}

/// Hessian `-(Z D1 + D1 Z + (alpha-2) Z D2 Z)` with
/// `D1 = diag((Zp)^(alpha-2))`, `D2 = diag(p * (Zp)^(alpha-3))`.
pub fn entropy_hessian(z: &SimilarityMatrix, alpha: OrderParameter, p: &Distribution) -> Result<DMatrix<f64>> {
    let a = check_smooth_regime(z, alpha, p)?;
    let zm = z.to_dense();
    let s = z.apply(p);
    let d1 = DVector::from_iterator(s.len(), s.iter().map(|si| pow(*si, a - 2.0)));
    let zd1 = DMatrix::from_fn(zm.nrows(), zm.ncols(), |i, j| zm[(i, j)] * d1[j]);
    let mut h = &zd1 + zd1.transpose();
    if a != 2.0 {
        let d2 = DVector::from_iterator(s.len(), p.iter().zip(&s).map(|(pi, si)| pi * pow(*si, a - 3.0)));
        let zd2 = DMatrix::from_fn(zm.nrows(), zm.ncols(), |i, j| zm[(i, j)] * d2[j]);
        h += (zd2 * &zm) * (a - 2.0);
    }
    Ok(-h)
}

/// A similarity matrix and order validated for divergence computations:
/// `Z` carries a positive-definiteness certificate and `alpha >= 2`.
#[derive(Debug, Clone, Copy)]
pub struct Geometry<'z> {
    z: &'z SimilarityMatrix,
    alpha: f64,
}

/// Per-distribution quantities reused across many divergence evaluations
/// with the distribution in the first slot.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    /// `p' (Zp)^(alpha-1)`
    self_term: f64,
    entropy: f64,
}

/// Per-distribution quantities for the second (reference) slot.
#[derive(Debug, Clone)]
pub(crate) struct Anchor {
    /// `(Zq)^(alpha-1)`
    s_pow: Vec<f64>,
    /// `Z diag((Zq)^(alpha-2)) q`
    grad_part: Vec<f64>,
    /// `grad_part' q`
    grad_dot_q: f64,
}

impl<'z> Geometry<'z> {
    pub fn new(z: &'z SimilarityMatrix, alpha: OrderParameter) -> Result<Self> {
        let alpha = alpha.require_divergence_regime()?.value();
        if !z.is_certified() {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: f64::NAN });
        }
        Ok(Self { z, alpha })
    }

    pub fn z(&self) -> &SimilarityMatrix {
        self.z
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn check(&self, p: &Distribution) -> Result<()> {
        check_dim(self.z, p)?;
        p.check_interior()
    }

    pub fn entropy(&self, p: &Distribution) -> Result<f64> {
        check_dim(self.z, p)?;
        entropy_from_ordinariness(self.alpha, p, &self.z.apply(p))
    }

    pub(crate) fn point(&self, p: &Distribution) -> Result<Point> {
        self.check(p)?;
        let s = self.z.apply(p);
        let self_term: f64 = p.iter().zip(&s).map(|(pi, si)| pi * pow(*si, self.alpha - 1.0)).sum();
        Ok(Point { self_term, entropy: (1.0 - self_term) / (self.alpha - 1.0) })
    }

    pub(crate) fn anchor(&self, q: &Distribution) -> Result<Anchor> {
        self.check(q)?;
        let a = self.alpha;
        let s = self.z.apply(q);
        let s_pow: Vec<f64> = s.iter().map(|si| pow(*si, a - 1.0)).collect();
        let weighted: Vec<f64> = q.iter().zip(&s).map(|(qi, si)| qi * pow(*si, a - 2.0)).collect();
        let grad_part = self.z.apply(&weighted);
        let grad_dot_q = grad_part.iter().zip(q.iter()).map(|(g, qi)| g * qi).sum();
        Ok(Anchor { s_pow, grad_part, grad_dot_q })
    }

    /// Divergence from precomputed parts; O(n).
    pub(crate) fn divergence_prepared(&self, p: &Distribution, pp: &Point, q: &Anchor) -> Result<f64> {
        let mut cross = 0.0;
        let mut grad_p = 0.0;
        for ((pi, sq), g) in p.iter().zip(&q.s_pow).zip(&q.grad_part) {
            cross += pi * sq;
            grad_p += g * pi;
        }
        clamp_divergence((pp.self_term - cross) / (self.alpha - 1.0) - (grad_p - q.grad_dot_q))
    }

    pub(crate) fn divergence_raw(&self, p: &Distribution, q: &Distribution) -> Result<f64> {
        let pp = self.point(p)?;
        let qa = self.anchor(q)?;
        self.divergence_prepared(p, &pp, &qa)
    }

    /// Structure-aware divergence `d(p || q)`.
    pub fn divergence(&self, p: &Distribution, q: &Distribution) -> Result<f64> {
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch { expected: p.dim(), got: q.dim() });
        }
        self.divergence_raw(p, q)
    }

    /// Bregman information of `{p, q}` with weights one half each.
    pub fn jensen_bregman(&self, p: &Distribution, q: &Distribution) -> Result<f64> {
        self.check(p)?;
        self.check(q)?;
        let mid = p.midpoint(q)?;
        let h_mid = self.entropy(&mid)?;
        let h_p = self.entropy(p)?;
        let h_q = self.entropy(q)?;
        clamp_divergence(h_mid - 0.5 * (h_p + h_q))
    }

    /// Expected divergence of the members from their weighted mean.
    pub fn bregman_information(&self, ensemble: &WeightedEnsemble) -> Result<BregmanInformation> {
        check_dim(self.z, &ensemble.members()[0])?;
        let mean = ensemble.mean();
        let anchor = self.anchor(&mean)?;
        let mut expected = 0.0;
        let mut member_entropy = 0.0;
        for (p, &w) in ensemble.members().iter().zip(ensemble.weights()) {
            let pp = self.point(p)?;
            expected += w * self.divergence_prepared(p, &pp, &anchor)?;
            member_entropy += w * pp.entropy;
        }
        let jensen_gap = self.entropy(&mean)? - member_entropy;
        Ok(BregmanInformation { value: expected, jensen_gap, mean })
    }
}

pub(crate) fn clamp_divergence(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -DIVERGENCE_FLOOR {
        Ok(0.0)
    } else {
        Err(Error::NegativeDivergence(v))
    }
}

/// Both forms of the Bregman information of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BregmanInformation {
    /// `sum_a w_a d(p^a || mu)`
    pub value: f64,
    /// `H(mu) - sum_a w_a H(p^a)`
    pub jensen_gap: f64,
    pub mean: Distribution,
}

/// Structure-aware divergence; `Z` must be certified positive definite.
pub fn divergence(z: &SimilarityMatrix, alpha: OrderParameter, p: &Distribution, q: &Distribution) -> Result<f64> {
    Geometry::new(z, alpha)?.divergence(p, q)
}

/// Jensen-Bregman divergence (equal weights).
pub fn jensen_bregman(z: &SimilarityMatrix, alpha: OrderParameter, p: &Distribution, q: &Distribution) -> Result<f64> {
    Geometry::new(z, alpha)?.jensen_bregman(p, q)
}

pub fn bregman_information(
    z: &SimilarityMatrix,
    alpha: OrderParameter,
    ensemble: &WeightedEnsemble,
) -> Result<BregmanInformation> {
    Geometry::new(z, alpha)?.bregman_information(ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(x: f64) -> OrderParameter {
        OrderParameter::new(x).unwrap()
    }

    fn d(v: &[f64]) -> Distribution {
        Distribution::new(v.to_vec()).unwrap()
    }

    #[test]
    fn order_parameter_validation() {
        assert!(OrderParameter::new(-0.5).is_err());
        assert!(OrderParameter::new(f64::NAN).is_err());
        assert!(a(1.5).require_divergence_regime().is_err());
        assert!(a(2.0).require_divergence_regime().is_ok());
    }

    #[test]
    fn ordinariness_examples() {
        let p = d(&[0.1, 0.2, 0.7]);
        assert_eq!(ordinariness(&SimilarityMatrix::identity(3), &p).unwrap(), p.to_vec());
        let ones = SimilarityMatrix::new(DMatrix::from_element(3, 3, 1.0)).unwrap();
        for x in ordinariness(&ones, &p).unwrap() {
            assert!((x - 1.0).abs() < 1e-15);
        }
        assert!(ordinariness(&SimilarityMatrix::identity(2), &p).is_err());
    }

    #[test]
    fn surprise_examples() {
        for al in [0.0, 0.5, 1.0, 2.0, 7.5] {
            assert_eq!(surprise(a(al), 1.0).unwrap(), 0.0);
        }
        assert!((surprise(a(2.0), 0.25).unwrap() - 0.75).abs() < 1e-15);
        assert!((surprise(a(1.0), (-1f64).exp()).unwrap() - 1.0).abs() < 1e-15);
        assert!(surprise(a(2.0), 0.0).is_err());
    }

    #[test]
    fn entropy_reductions() {
        let u4 = Distribution::uniform(4).unwrap();
        let id = SimilarityMatrix::identity(4);
        assert!((entropy(&id, a(2.0), &u4).unwrap() - 0.75).abs() < 1e-15);
        for n in [2usize, 5, 17] {
            let u = Distribution::uniform(n).unwrap();
            let h = entropy(&SimilarityMatrix::identity(n), a(1.0), &u).unwrap();
            assert!((h - (n as f64).ln()).abs() < 1e-13);
        }
        // 0 ln 0 := 0
        let p = d(&[0.5, 0.5, 0.0]);
        let h = entropy(&SimilarityMatrix::identity(3), a(1.0), &p).unwrap();
        assert!((h - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn gradient_hessian_identity_alpha_two() {
        let p = d(&[0.1, 0.2, 0.3, 0.4]);
        let id = SimilarityMatrix::identity(4);
        let g = entropy_gradient(&id, a(2.0), &p).unwrap();
        for (gi, pi) in g.iter().zip(p.iter()) {
            assert!((gi + 2.0 * pi).abs() < 1e-15);
        }
        let u = Distribution::uniform(5).unwrap();
        let g = entropy_gradient(&SimilarityMatrix::identity(5), a(2.0), &u).unwrap();
        assert!(g.iter().all(|x| (x + 0.4).abs() < 1e-15));
        let h = entropy_hessian(&id, a(2.0), &p).unwrap();
        assert!((h + DMatrix::identity(4, 4) * 2.0).norm() < 1e-15);
        assert!(entropy_gradient(&id, a(1.5), &p).is_err());
        assert!(entropy_gradient(&id, a(2.0), &d(&[0.5, 0.5, 0.0, 0.0])).is_err());
    }

    #[test]
    fn divergence_mahalanobis_example() {
        let id = SimilarityMatrix::identity(2);
        let p = d(&[0.6, 0.4]);
        let q = d(&[0.4, 0.6]);
        assert!((divergence(&id, a(2.0), &p, &q).unwrap() - 0.08).abs() < 1e-15);
        assert_eq!(divergence(&id, a(3.0), &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn divergence_requires_certificate_and_order() {
        let z = SimilarityMatrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let p = d(&[0.6, 0.4]);
        assert!(matches!(divergence(&z, a(2.0), &p, &p), Err(Error::NotPositiveDefinite { .. })));
        let z = z.certified().unwrap();
        assert!(divergence(&z, a(2.0), &p, &p).is_ok());
        assert!(matches!(divergence(&z, a(1.5), &p, &p), Err(Error::AlphaTooSmall(_))));
        assert!(divergence(&z, a(2.0), &p, &d(&[1.0, 0.0])).is_err());
        assert!(divergence(&z, a(2.0), &p, &d(&[0.2, 0.3, 0.5])).is_err());
    }

    #[test]
    fn jensen_bregman_symmetric_and_zero_on_diagonal() {
        let z = SimilarityMatrix::from_rows(&[vec![1.0, 0.4, 0.1], vec![0.4, 1.0, 0.2], vec![0.1, 0.2, 1.0]])
            .unwrap()
            .certified()
            .unwrap();
        let p = d(&[0.2, 0.3, 0.5]);
        let q = d(&[0.6, 0.1, 0.3]);
        for al in [2.0, 2.5, 3.0] {
            assert_eq!(jensen_bregman(&z, a(al), &p, &p).unwrap(), 0.0);
            assert_eq!(jensen_bregman(&z, a(al), &p, &q).unwrap(), jensen_bregman(&z, a(al), &q, &p).unwrap());
        }
    }

    #[test]
    fn bregman_information_trivial_cases() {
        let z = SimilarityMatrix::identity(3);
        let p = d(&[0.2, 0.3, 0.5]);
        let single = WeightedEnsemble::uniform(vec![p.clone()]).unwrap();
        assert_eq!(bregman_information(&z, a(2.0), &single).unwrap().value, 0.0);
        let same = WeightedEnsemble::uniform(vec![p.clone(), p.clone(), p]).unwrap();
        let bi = bregman_information(&z, a(3.0), &same).unwrap();
        assert!(bi.value.abs() < 1e-15 && bi.jensen_gap.abs() < 1e-15);
    }
}
