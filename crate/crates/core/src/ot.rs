//! Exact Wasserstein-1 distance between distributions on a finite metric
//! space, by the transportation simplex (network simplex on the bipartite
//! supply/demand graph).
//!
//! The basis is a spanning tree over the supply and demand nodes. Entering
//! cells are priced with Dantzig's rule; after a pivot budget the solver
//! switches to Bland's rule (lowest-index entering and leaving cells), which
//! cannot cycle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::info::{PairwiseDissimilarityMatrix, PairwiseMethod};
use crate::par::{try_map_indices, Execution};
use crate::similarity::DistanceMatrix;
use crate::simplex::Distribution;

/// Optimal coupling together with the dual potentials that certify it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    /// `plan[(i, j)]` is the mass moved from element `i` of `p` to element `j` of `q`.
    #[serde(skip)]
    pub plan: DMatrix<f64>,
    pub cost: f64,
    /// Dual variables: `cost = sum_i u_i p_i + sum_j v_j q_j` at the optimum.
    pub row_potentials: Vec<f64>,
    pub col_potentials: Vec<f64>,
    pub pivots: usize,
}

/// Exact `W1(p, q)` with ground metric `d`.
pub fn wasserstein1(d: &DistanceMatrix, p: &Distribution, q: &Distribution) -> Result<(f64, TransportPlan)> {
    if p.dim() != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: p.dim() });
    }
    if q.dim() != d.dim() {
        return Err(Error::DimensionMismatch { expected: d.dim(), got: q.dim() });
    }
    let plan = solve_transport(d.entries(), p, q)?;
    Ok((plan.cost, plan))
}

/// Per-pair exact solves over the strict upper triangle, mirrored.
pub fn all_pairs_wasserstein(
    d: &DistanceMatrix,
    members: &[Distribution],
    exec: Execution,
) -> Result<PairwiseDissimilarityMatrix> {
    let m = members.len();
    let rows = try_map_indices(exec, m, |i| {
        ((i + 1)..m).map(|j| wasserstein1(d, &members[i], &members[j]).map(|r| r.0)).collect::<Result<Vec<_>>>()
    })?;
    Ok(PairwiseDissimilarityMatrix::from_upper_rows(m, rows, PairwiseMethod::Wasserstein1))
}

#[derive(Debug, Clone, Copy)]
struct Basic {
    row: usize,
    col: usize,
    flow: f64,
}

/// Transportation problem restricted to the supports of `p` and `q`.
struct Problem<'a> {
    cost: &'a DMatrix<f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    supply: Vec<f64>,
    demand: Vec<f64>,
}

impl Problem<'_> {
    fn c(&self, i: usize, j: usize) -> f64 {
        self.cost[(self.rows[i], self.cols[j])]
    }
}

/// Spanning-tree bookkeeping, rebuilt from the basis after every pivot.
struct Tree {
    /// potentials: rows `0..r`, columns `r..r+c`
    potential: Vec<f64>,
    parent: Vec<usize>,
    parent_edge: Vec<usize>,
    depth: Vec<usize>,
}

pub(crate) fn solve_transport(cost: &DMatrix<f64>, p: &[f64], q: &[f64]) -> Result<TransportPlan> {
    let rows: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let cols: Vec<usize> = (0..q.len()).filter(|&j| q[j] > 0.0).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::Empty("transport marginal"));
    }
    let prob = Problem {
        cost,
        supply: rows.iter().map(|&i| p[i]).collect(),
        demand: cols.iter().map(|&j| q[j]).collect(),
        rows,
        cols,
    };
    let (r, c) = (prob.rows.len(), prob.cols.len());
    let mut basis = initial_basis(&prob);
    debug_assert_eq!(basis.len(), r + c - 1);

    let max_cost = prob.rows.iter().flat_map(|&i| prob.cols.iter().map(move |&j| cost[(i, j)])).fold(0.0, f64::max);
    let eps = 1e-12 * (1.0 + max_cost);
    let dantzig_budget = 50 * (r + c);
    let hard_cap = dantzig_budget + 200 * r * c + 10_000;

    let mut is_basic = vec![false; r * c];
    for b in &basis {
        is_basic[b.row * c + b.col] = true;
    }
    let mut pivots = 0;
    let tree = loop {
        let tree = build_tree(&prob, &basis);
        let bland = pivots >= dantzig_budget;
        let Some((ei, ej)) = price(&prob, &tree, &is_basic, eps, bland) else {
            break tree;
        };
        if pivots >= hard_cap {
            return Err(Error::NotConverged { iterations: pivots });
        }
        pivot(&mut basis, &mut is_basic, &tree, c, r, ei, ej);
        pivots += 1;
    };

    // assemble outputs on the full index set
    let n_rows = p.len();
    let n_cols = q.len();
    let mut plan = DMatrix::zeros(n_rows, n_cols);
    let mut total = 0.0;
    for b in &basis {
        let (i, j) = (prob.rows[b.row], prob.cols[b.col]);
        let f = b.flow.max(0.0);
        plan[(i, j)] += f;
        total += f * cost[(i, j)];
    }
    let mut u = vec![f64::NAN; n_rows];
    let mut v = vec![f64::NAN; n_cols];
    for (k, &i) in prob.rows.iter().enumerate() {
        u[i] = tree.potential[k];
    }
    for (k, &j) in prob.cols.iter().enumerate() {
        v[j] = tree.potential[r + k];
    }
    // zero-mass elements: pick the largest dual-feasible potential
    for i in 0..n_rows {
        if u[i].is_nan() {
            u[i] = prob.cols.iter().map(|&j| cost[(i, j)] - v[j]).fold(f64::INFINITY, f64::min);
        }
    }
    for j in 0..n_cols {
        if v[j].is_nan() {
            v[j] = (0..n_rows).map(|i| cost[(i, j)] - u[i]).fold(f64::INFINITY, f64::min);
        }
    }
    Ok(TransportPlan { plan, cost: total, row_potentials: u, col_potentials: v, pivots })
}

/// Least-cost starting basis. Each allocation retires exactly one row or
/// column (both on the final one), so the result has `r + c - 1` cells and
/// forms a spanning tree even when allocations are degenerate.
fn initial_basis(prob: &Problem<'_>) -> Vec<Basic> {
    let (r, c) = (prob.rows.len(), prob.cols.len());
    let mut cells: Vec<(usize, usize)> = (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).collect();
    cells.sort_by(|a, b| prob.c(a.0, a.1).total_cmp(&prob.c(b.0, b.1)).then(a.cmp(b)));
    let mut supply = prob.supply.clone();
    let mut demand = prob.demand.clone();
    let mut row_live = vec![true; r];
    let mut col_live = vec![true; c];
    let (mut rows_left, mut cols_left) = (r, c);
    let mut basis = Vec::with_capacity(r + c - 1);
    for &(i, j) in &cells {
        if !row_live[i] || !col_live[j] {
            continue;
        }
        let x = supply[i].min(demand[j]);
        supply[i] -= x;
        demand[j] -= x;
        basis.push(Basic { row: i, col: j, flow: x });
        if rows_left == 1 && cols_left == 1 {
            // the last cell absorbs rounding drift between the marginals
            basis.last_mut().unwrap().flow += supply[i].max(demand[j]);
            break;
        }
        if (supply[i] <= demand[j] && rows_left > 1) || cols_left == 1 {
            row_live[i] = false;
            rows_left -= 1;
            demand[j] += supply[i];
        } else {
            col_live[j] = false;
            cols_left -= 1;
            supply[i] += demand[j];
        }
    }
    basis
}

fn build_tree(prob: &Problem<'_>, basis: &[Basic]) -> Tree {
    let (r, c) = (prob.rows.len(), prob.cols.len());
    let nodes = r + c;
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    for (k, b) in basis.iter().enumerate() {
        adjacency[b.row].push(k);
        adjacency[r + b.col].push(k);
    }
    let mut tree = Tree {
        potential: vec![0.0; nodes],
        parent: vec![usize::MAX; nodes],
        parent_edge: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
    };
    let mut visited = vec![false; nodes];
    let mut stack = vec![0usize];
    visited[0] = true;
    while let Some(node) = stack.pop() {
        for &k in &adjacency[node] {
            let b = basis[k];
            let other = if node == b.row { r + b.col } else { b.row };
            if visited[other] {
                continue;
            }
            visited[other] = true;
            let cost = prob.c(b.row, b.col);
            // c_ij = u_i + v_j on basic cells
            tree.potential[other] = cost - tree.potential[node];
            tree.parent[other] = node;
            tree.parent_edge[other] = k;
            tree.depth[other] = tree.depth[node] + 1;
            stack.push(other);
        }
    }
    tree
}

/// Entering cell: most negative reduced cost (Dantzig) or the first negative
/// one in index order (Bland). `None` at optimality.
fn price(prob: &Problem<'_>, tree: &Tree, is_basic: &[bool], eps: f64, bland: bool) -> Option<(usize, usize)> {
    let (r, c) = (prob.rows.len(), prob.cols.len());
    let mut best = None;
    let mut best_rc = -eps;
    for i in 0..r {
        let ui = tree.potential[i];
        let row = prob.rows[i];
        for j in 0..c {
            if is_basic[i * c + j] {
                continue;
            }
            let rc = prob.cost[(row, prob.cols[j])] - ui - tree.potential[r + j];
            if rc < best_rc {
                if bland {
                    return Some((i, j));
                }
                best_rc = rc;
                best = Some((i, j));
            }
        }
    }
    best
}

fn pivot(basis: &mut [Basic], is_basic: &mut [bool], tree: &Tree, c: usize, r: usize, ei: usize, ej: usize) {
    // tree path from column node of ej to row node ei, as basis indices
    let (mut a, mut b) = (r + ej, ei);
    let mut from_col = Vec::new();
    let mut from_row = Vec::new();
    while tree.depth[a] > tree.depth[b] {
        from_col.push(tree.parent_edge[a]);
        a = tree.parent[a];
    }
    while tree.depth[b] > tree.depth[a] {
        from_row.push(tree.parent_edge[b]);
        b = tree.parent[b];
    }
    while a != b {
        from_col.push(tree.parent_edge[a]);
        a = tree.parent[a];
        from_row.push(tree.parent_edge[b]);
        b = tree.parent[b];
    }
    from_row.reverse();
    let path: Vec<usize> = from_col.into_iter().chain(from_row).collect();

    // edges alternate -, +, -, ... starting next to the entering column
    let mut theta = f64::INFINITY;
    let mut leaving = usize::MAX;
    for (pos, &k) in path.iter().enumerate() {
        if pos % 2 == 0 {
            let f = basis[k].flow;
            let id = basis[k].row * c + basis[k].col;
            let better = f < theta || (f == theta && id < basis[leaving].row * c + basis[leaving].col);
            if better {
                theta = f;
                leaving = k;
            }
        }
    }
    let theta = theta.max(0.0);
    for (pos, &k) in path.iter().enumerate() {
        if pos % 2 == 0 {
            basis[k].flow -= theta;
        } else {
            basis[k].flow += theta;
        }
    }
    let old = basis[leaving];
    is_basic[old.row * c + old.col] = false;
    is_basic[ei * c + ej] = true;
    basis[leaving] = Basic { row: ei, col: ej, flow: theta };
}
