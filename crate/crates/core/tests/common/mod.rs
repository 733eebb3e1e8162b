//! Independent oracles and instance generators shared by the integration
//! tests and the acceptance runner.
#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use structdiv::similarity::{similarity_from_metric, DistanceMatrix};
use structdiv::{Distribution, SimilarityMatrix, WeightedEnsemble};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Interior point with entries bounded away from zero.
pub fn interior<R: Rng>(rng: &mut R, n: usize) -> Distribution {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.02).collect();
    Distribution::from_counts(&raw).unwrap()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn random_points<R: Rng>(rng: &mut R, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

/// `exp(-tau d)` on random Euclidean points, certified.
pub fn random_pd_similarity<R: Rng>(rng: &mut R, n: usize) -> SimilarityMatrix {
    let dim = rng.random_range(1..=4);
    let pts = random_points(rng, n, dim);
    let d = DistanceMatrix::from_points(&pts, euclidean).unwrap();
    let tau = 10f64.powf(rng.random_range(-0.5..1.0));
    similarity_from_metric(&d, tau).unwrap().certified().unwrap()
}

/// Entropy evaluated directly on an arbitrary positive vector.
pub fn entropy_oracle(z: &DMatrix<f64>, alpha: f64, x: &[f64]) -> f64 {
    let n = x.len();
    let zx: Vec<f64> = (0..n).map(|i| (0..n).map(|j| z[(i, j)] * x[j]).sum()).collect();
    if (alpha - 1.0).abs() < 1e-15 {
        -x.iter().zip(&zx).map(|(p, s)| if *p == 0.0 { 0.0 } else { p * s.ln() }).sum::<f64>()
    } else {
        (1.0 - x.iter().zip(&zx).map(|(p, s)| p * s.powf(alpha - 1.0)).sum::<f64>()) / (alpha - 1.0)
    }
}

/// Bregman divergence of the oracle entropy from first principles:
/// `-H(p) + H(q) + <grad H(q), p - q>` with a central-difference gradient.
pub fn divergence_oracle(z: &DMatrix<f64>, alpha: f64, p: &[f64], q: &[f64]) -> f64 {
    let g = fd_gradient(z, alpha, q, 1e-6);
    let dot: f64 = g.iter().zip(p.iter().zip(q)).map(|(gi, (a, b))| gi * (a - b)).sum();
    -entropy_oracle(z, alpha, p) + entropy_oracle(z, alpha, q) + dot
}

pub fn fd_gradient(z: &DMatrix<f64>, alpha: f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut a, mut b) = (x.to_vec(), x.to_vec());
            a[i] += h;
            b[i] -= h;
            (entropy_oracle(z, alpha, &a) - entropy_oracle(z, alpha, &b)) / (2.0 * h)
        })
        .collect()
}

pub fn fd_hessian(z: &DMatrix<f64>, alpha: f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    DMatrix::from_fn(n, n, |i, j| {
        let f = |di: f64, dj: f64| {
            let mut y = x.to_vec();
            y[i] += di;
            y[j] += dj;
            entropy_oracle(z, alpha, &y)
        };
        (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h)
    })
}

/// Small transport instance: margins are integer counts over `k` units.
#[derive(Debug, Clone)]
pub struct TransportInstance {
    pub d: DistanceMatrix,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub k: u32,
}

impl TransportInstance {
    pub fn p(&self) -> Distribution {
        Distribution::new(self.a.iter().map(|&x| x as f64 / self.k as f64).collect()).unwrap()
    }

    pub fn q(&self) -> Distribution {
        Distribution::new(self.b.iter().map(|&x| x as f64 / self.k as f64).collect()).unwrap()
    }
}

fn random_composition<R: Rng>(rng: &mut R, n: usize, k: u32) -> Vec<u32> {
    let mut v = vec![0u32; n];
    for _ in 0..k {
        v[rng.random_range(0..n)] += 1;
    }
    v
}

/// Path-graph metric on `n` points with random edge lengths.
fn path_metric<R: Rng>(rng: &mut R, n: usize) -> DistanceMatrix {
    let mut pos = vec![0.0];
    for _ in 1..n {
        let last = *pos.last().unwrap();
        pos.push(last + rng.random_range(0.1..2.0));
    }
    let pts: Vec<Vec<f64>> = pos.into_iter().map(|x| vec![x]).collect();
    DistanceMatrix::from_points(&pts, euclidean).unwrap()
}

/// Deterministic corpus of transport problems with `n <= 5`: Euclidean and
/// path metrics, margins in multiples of 1/k.
pub fn transport_corpus() -> Vec<TransportInstance> {
    let mut out = Vec::new();
    let mut r = rng(0x57a7);
    for n in 1..=5usize {
        for case in 0..24 {
            let d = match case % 3 {
                0 => DistanceMatrix::from_points(&random_points(&mut r, n, 2), euclidean).unwrap(),
                1 => path_metric(&mut r, n),
                _ => DistanceMatrix::from_points(&random_points(&mut r, n, 3), |a, b| {
                    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
                })
                .unwrap(),
            };
            let k = if n <= 3 { 8 } else { 5 };
            out.push(TransportInstance {
                a: random_composition(&mut r, n, k),
                b: random_composition(&mut r, n, k),
                d,
                k,
            });
        }
    }
    out
}

/// Exact optimum by enumerating every integral transport plan. Integer
/// margins make every vertex of the transport polytope integral, so the
/// minimum over integral plans is the LP optimum.
pub fn w1_brute_force(inst: &TransportInstance) -> f64 {
    let n = inst.a.len();
    let mut best = f64::INFINITY;
    let mut cols = inst.b.clone();
    let mut plan = vec![0u32; n * n];
    fn fill_row(
        inst: &TransportInstance,
        row: usize,
        col: usize,
        left: u32,
        cols: &mut Vec<u32>,
        plan: &mut Vec<u32>,
        best: &mut f64,
    ) {
        let n = inst.a.len();
        if row == n {
            let cost: f64 = (0..n * n).map(|c| plan[c] as f64 * inst.d.get(c / n, c % n)).sum();
            *best = best.min(cost / inst.k as f64);
            return;
        }
        if col == n - 1 {
            if left > cols[col] {
                return;
            }
            cols[col] -= left;
            plan[row * n + col] = left;
            let next = if row + 1 < n { inst.a[row + 1] } else { 0 };
            fill_row(inst, row + 1, 0, next, cols, plan, best);
            cols[col] += left;
            plan[row * n + col] = 0;
            return;
        }
        for x in 0..=left.min(cols[col]) {
            cols[col] -= x;
            plan[row * n + col] = x;
            fill_row(inst, row, col + 1, left - x, cols, plan, best);
            cols[col] += x;
        }
        plan[row * n + col] = 0;
    }
    fill_row(inst, 0, 0, inst.a[0], &mut cols, &mut plan, &mut best);
    best
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().max()
}

/// Relative error with an absolute floor for values near zero.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-3)
}

pub fn ensemble(seed: u64, m: usize, n: usize) -> WeightedEnsemble {
    let mut r = rng(seed);
    let members = (0..m).map(|_| interior(&mut r, n)).collect();
    let raw: Vec<f64> = (0..m).map(|_| r.random::<f64>() + 0.1).collect();
    WeightedEnsemble::with_raw_weights(members, &raw).unwrap()
}

/// Weighted tree on `n` nodes, each attached to a random earlier node.
pub fn tree_metric(seed: u64, n: usize) -> DistanceMatrix {
    let mut r = rng(seed);
    let mut d = DMatrix::zeros(n, n);
    for v in 1..n {
        let parent = r.random_range(0..v);
        let w = r.random_range(0.2..2.0);
        for u in 0..v {
            d[(v, u)] = d[(parent, u)] + w;
            d[(u, v)] = d[(v, u)];
        }
    }
    DistanceMatrix::new(d).unwrap()
}
