//! Exact minimum-cost perfect matching between a sample and a grid.
//!
//! The solver is the shortest-augmenting-path method for dense linear
//! assignment (Jonker-Volgenant family, in the form popularized by Crouse):
//! one Dijkstra-like search per row over reduced costs maintained by dual
//! potentials, `O(n^3)` worst case.

use nalgebra::DMatrix;

use crate::error::{CorankError, Result};

/// Dense square matrix of nonnegative pairing costs, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(CorankError::InvalidInput(format!(
                    "cost matrix row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        Ok(CostMatrix { n, entries })
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(CorankError::InvalidInput(format!(
                "cost matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let n = m.nrows();
        let entries = (0..n).flat_map(|i| (0..n).map(move |j| m[(i, j)])).collect();
        Ok(CostMatrix { n, entries })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// Sum of `cost(i, perm[i])`, accumulated in row order.
    pub fn cost_of(&self, perm: &[usize]) -> f64 {
        perm.iter().enumerate().map(|(i, &j)| self.get(i, j)).sum()
    }
}

/// Observation `i` is paired with gridpoint `assignment[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub assignment: Vec<usize>,
    pub total_cost: f64,
}

/// Pairwise squared Euclidean distances between the rows of `sample` and
/// the rows of `grid`.
pub fn squared_cost(sample: &DMatrix<f64>, grid: &DMatrix<f64>) -> Result<CostMatrix> {
    if sample.nrows() != grid.nrows() {
        return Err(CorankError::InvalidInput(format!(
            "sample has {} points but grid has {}",
            sample.nrows(),
            grid.nrows()
        )));
    }
    if sample.ncols() != grid.ncols() {
        return Err(CorankError::InvalidInput(format!(
            "sample dimension {} differs from grid dimension {}",
            sample.ncols(),
            grid.ncols()
        )));
    }
    let n = sample.nrows();
    let d = sample.ncols();
    // column-major storage; copy rows out once so the inner loop is contiguous
    let zs: Vec<f64> = (0..n).flat_map(|i| (0..d).map(move |k| sample[(i, k)])).collect();
    let gs: Vec<f64> = (0..n).flat_map(|j| (0..d).map(move |k| grid[(j, k)])).collect();
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        let z = &zs[i * d..(i + 1) * d];
        for j in 0..n {
            let g = &gs[j * d..(j + 1) * d];
            entries.push(z.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    Ok(CostMatrix { n, entries })
}

/// Exact linear sum assignment. Among co-optimal permutations the one
/// returned is determined by the input order.
pub fn solve_assignment(cost: &CostMatrix) -> Result<Pairing> {
    let n = cost.n;
    if let Some(bad) = cost.entries.iter().find(|v| !v.is_finite()) {
        return Err(CorankError::InvalidInput(format!("non-finite cost entry {bad}")));
    }
    if n == 0 {
        return Ok(Pairing { assignment: Vec::new(), total_cost: 0.0 });
    }

    const NONE: usize = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col_for_row = vec![NONE; n];
    let mut row_for_col = vec![NONE; n];

    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NONE; n];
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);

    for start in 0..n {
        dist.fill(f64::INFINITY);
        row_done.fill(false);
        col_done.fill(false);
        remaining.clear();
        // reverse order makes a constant matrix resolve to the identity
        remaining.extend((0..n).rev());

        let mut i = start;
        let mut min_val = 0.0;
        let sink = loop {
            row_done[i] = true;
            let row = cost.row(i);
            let ui = u[i];
            let mut best = f64::INFINITY;
            let mut best_pos = NONE;
            for (pos, &j) in remaining.iter().enumerate() {
                let reduced = min_val + row[j] - ui - v[j];
                if reduced < dist[j] {
                    pred[j] = i;
                    dist[j] = reduced;
                }
                // prefer an unassigned column on ties so the search stops early
                if dist[j] < best || (dist[j] == best && row_for_col[j] == NONE) {
                    best = dist[j];
                    best_pos = pos;
                }
            }
            if best_pos == NONE || !best.is_finite() {
                return Err(CorankError::Numerical("assignment search found no augmenting path".into()));
            }
            min_val = best;
            let j = remaining.swap_remove(best_pos);
            col_done[j] = true;
            if row_for_col[j] == NONE {
                break j;
            }
            i = row_for_col[j];
        };

        // dual update
        u[start] += min_val;
        for r in 0..n {
            if row_done[r] && r != start {
                u[r] += min_val - dist[col_for_row[r]];
            }
        }
        for c in 0..n {
            if col_done[c] {
                v[c] -= min_val - dist[c];
            }
        }

        // augment along the predecessor chain
        let mut j = sink;
        loop {
            let r = pred[j];
            row_for_col[j] = r;
            let prev = std::mem::replace(&mut col_for_row[r], j);
            if r == start {
                break;
            }
            j = prev;
        }
    }

    let total_cost = cost.cost_of(&col_for_row);
    Ok(Pairing { assignment: col_for_row, total_cost })
}

/// Exhaustive minimum over all `n!` permutations; refuses `n > 9`.
pub fn brute_force_assignment(cost: &CostMatrix) -> Result<Pairing> {
    let n = cost.n;
    if n > 9 {
        return Err(CorankError::InvalidInput(format!(
            "brute-force assignment limited to n <= 9, got {n}"
        )));
    }
    if let Some(bad) = cost.entries.iter().find(|v| !v.is_finite()) {
        return Err(CorankError::InvalidInput(format!("non-finite cost entry {bad}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_cost = cost.cost_of(&perm);

    // Heap's algorithm, iterative form
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            let total = cost.cost_of(&perm);
            if total < best_cost {
                best_cost = total;
                best.copy_from_slice(&perm);
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(Pairing { assignment: best, total_cost: best_cost })
}
