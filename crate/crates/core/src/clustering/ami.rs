//! Adjusted mutual information between two labelings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// `ln(k!)` for `k = 0..=n`.
fn log_factorials(n: usize) -> Vec<f64> {
    let mut t = vec![0.0; n + 1];
    for k in 1..=n {
        t[k] = t[k - 1] + (k as f64).ln();
    }
    t
}

fn compact<T: Ord + Clone>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let out = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(l.clone()).or_insert(next)
        })
        .collect();
    (out, ids.len())
}

fn entropy_of_counts(counts: &[usize], n: f64) -> f64 {
    counts.iter().filter(|&&c| c > 0).map(|&c| c as f64 / n).map(|p| -p * p.ln()).sum()
}

/// AMI with arithmetic-mean normalization and the expected mutual
/// information under the hypergeometric (fixed marginals) model:
/// `(MI - E[MI]) / (mean(H_a, H_b) - E[MI])`.
pub fn adjusted_mutual_information<T: Ord + Clone>(labels_a: &[T], labels_b: &[T]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::DimensionMismatch { expected: labels_a.len(), got: labels_b.len() });
    }
    if labels_a.is_empty() {
        return Err(Error::Empty("labelings"));
    }
    let (a, ka) = compact(labels_a);
    let (b, kb) = compact(labels_b);
    if ka == 1 && kb == 1 {
        return Ok(1.0);
    }
    let n_items = a.len();
    let n = n_items as f64;
    let mut table = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(&b) {
        table[x][y] += 1;
    }
    let row: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col: Vec<usize> = (0..kb).map(|j| table.iter().map(|r| r[j]).sum()).collect();

    let mut mi = 0.0;
    for i in 0..ka {
        for j in 0..kb {
            let nij = table[i][j];
            if nij > 0 {
                let x = nij as f64;
                mi += x / n * (n * x / (row[i] as f64 * col[j] as f64)).ln();
            }
        }
    }

    let lf = log_factorials(n_items);
    let mut emi = 0.0;
    for &ai in &row {
        for &bj in &col {
            let lo = (ai + bj).saturating_sub(n_items).max(1);
            let hi = ai.min(bj);
            for nij in lo..=hi {
                let x = nij as f64;
                let term = x / n * (n * x / (ai as f64 * bj as f64)).ln();
                let log_p = lf[ai] + lf[bj] + lf[n_items - ai] + lf[n_items - bj]
                    - lf[n_items]
                    - lf[nij]
                    - lf[ai - nij]
                    - lf[bj - nij]
                    - lf[n_items + nij - ai - bj];
                emi += term * log_p.exp();
            }
        }
    }

    let h_a = entropy_of_counts(&row, n);
    let h_b = entropy_of_counts(&col, n);
    // Both terms are pushed away from zero with their sign kept, so a
    // perfect match whose expected MI equals its MI scores 1.
    let guard = |x: f64| if x < 0.0 { x.min(-f64::EPSILON) } else { x.max(f64::EPSILON) };
    Ok(guard(mi - emi) / guard(0.5 * (h_a + h_b) - emi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::task_rng;
    use rand::Rng;

    #[test]
    fn identical_and_relabelled() {
        let a = [0, 0, 1, 1, 2, 2, 2];
        assert!((adjusted_mutual_information(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let b = [5, 5, 3, 3, 9, 9, 9];
        assert!((adjusted_mutual_information(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_clusters() {
        assert_eq!(adjusted_mutual_information(&[1, 1, 1], &[2, 2, 2]).unwrap(), 1.0);
        assert!(adjusted_mutual_information(&[1, 1, 1, 1], &[0, 0, 1, 1]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(adjusted_mutual_information::<u8>(&[], &[]).is_err());
        assert!(adjusted_mutual_information(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn known_value() {
        // scikit-learn adjusted_mutual_info_score on the same labelings
        let a = [0, 0, 0, 1, 1, 1];
        let b = [0, 0, 1, 1, 2, 2];
        let ami = adjusted_mutual_information(&a, &b).unwrap();
        assert!((ami - 0.298_792_458_170_890_1).abs() < 1e-9, "{ami}");
    }

    #[test]
    fn symmetric() {
        let a = [0, 1, 1, 2, 0, 2, 1, 0];
        let b = [1, 1, 0, 0, 2, 2, 1, 0];
        assert!((adjusted_mutual_information(&a, &b).unwrap() + 0.174_233_070_731_915_13).abs() < 1e-9);
        assert!(
            (adjusted_mutual_information(&a, &b).unwrap() - adjusted_mutual_information(&b, &a).unwrap()).abs() < 1e-14
        );
    }

    #[test]
    fn independent_labelings_near_zero() {
        let mut rng = task_rng(77, 0);
        let a: Vec<u8> = (0..1000).map(|_| rng.random_range(0..3)).collect();
        let b: Vec<u8> = (0..1000).map(|_| rng.random_range(0..3)).collect();
        assert!(adjusted_mutual_information(&a, &b).unwrap().abs() < 0.05);
    }
}
