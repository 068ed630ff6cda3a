//! Sparse sample-to-anchor graphs.
//!
//! Each row `s_i` of an anchor graph minimizes
//! `Σ_j ‖z_i − u_j‖² s_ij + γ_i ‖s_i‖²` over the probability simplex. With
//! the squared distances of row `i` sorted ascending, `d_1 ≤ … ≤ d_m`, and
//! `γ_i` chosen so that exactly `k` anchors survive, the minimizer is
//!
//! ```text
//! s_ij = (d_{k+1} − d_j) / Σ_{h≤k} (d_{k+1} − d_h)    for the k nearest anchors
//! γ_i  = Σ_{h≤k} (d_{k+1} − d_h) / 2
//! ```
//!
//! and zero elsewhere, so no regularization weight has to be tuned. Rows are
//! nonincreasing in distance by construction.
//!
//! From `S` (n×m) and its anchor degrees `D = diag(Σ_i s_ij)` come the m×m
//! propagation operator `Â = D⁻¹ Sᵀ S` used by the anchor convolution, and
//! the n×n sample graph `G = S D⁻¹ Sᵀ`, which is symmetric with unit row and
//! column sums. Zero-degree anchors use `1/0 := 0`.

use std::io::Write;
use std::sync::Arc;

use crate::ad::matrix::sq_dist;
use crate::ad::{Matrix, SparseRows};
use crate::error::{shape_err, DmacError, Result};

pub const DEFAULT_NEIGHBORS: usize = 5;

/// Largest `n` for which [`full_sample_graph`] materializes the n×n graph.
pub const FULL_GRAPH_CAP: usize = 4096;

/// Row-stochastic sparse n×m graph between samples and anchors.
#[derive(Debug, Clone)]
pub struct AnchorGraph {
    k: usize,
    s: Arc<SparseRows>,
    degrees: Vec<f64>,
    gamma: Vec<f64>,
}

impl AnchorGraph {
    pub fn n(&self) -> usize {
        self.s.rows()
    }

    pub fn m(&self) -> usize {
        self.s.cols()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sparse(&self) -> &Arc<SparseRows> {
        &self.s
    }

    /// `d_j = Σ_i s_ij`.
    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    /// Diagonal pseudo-inverse of the degree matrix.
    pub fn inv_degrees(&self) -> Vec<f64> {
        self.degrees
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
            .collect()
    }

    /// Regularization weight each row's closed form corresponds to; zero for
    /// rows that fell back to uniform weights.
    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.s.row(i)
    }

    pub fn to_dense(&self) -> Matrix {
        self.s.to_dense()
    }

    /// Writes one `i j s_ij` line per stored entry.
    pub fn write_coo(&self, mut w: impl Write) -> std::io::Result<()> {
        for i in 0..self.n() {
            for (j, s) in self.row(i) {
                writeln!(w, "{i} {j} {s}")?;
            }
        }
        Ok(())
    }

    /// Builds a graph from explicit rows; each row must be a probability vector.
    pub fn from_rows(m: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            let total: f64 = r.iter().map(|e| e.1).sum();
            if r.iter().any(|e| e.1 < 0.0) || (total - 1.0).abs() > 1e-9 {
                return Err(DmacError::Argument(format!(
                    "row {i} is not a probability vector (sum {total})"
                )));
            }
        }
        let s = SparseRows::from_row_entries(m, rows)?;
        let degrees = s.col_sums();
        Ok(Self {
            k: rows.iter().map(Vec::len).max().unwrap_or(0),
            s: Arc::new(s),
            degrees,
            gamma: vec![0.0; rows.len()],
        })
    }
}

/// Closed-form anchor graph of `z` (n×d) against anchors `u` (m×d), keeping
/// `k` neighbors per row.
///
/// Requires `1 ≤ k ≤ m − 1`; `k = m` is accepted and gives uniform rows.
/// Ties in distance are broken by anchor index. A row whose `k + 1` nearest
/// distances all coincide also falls back to uniform weights over its `k`
/// nearest anchors.
pub fn solve_anchor_graph(z: &Matrix, u: &Matrix, k: usize) -> Result<AnchorGraph> {
    let (n, m) = (z.rows(), u.rows());
    if z.cols() != u.cols() {
        return shape_err(
            "anchor_graph",
            format!("samples have width {}, anchors {}", z.cols(), u.cols()),
        );
    }
    if k == 0 || k > m {
        return Err(DmacError::Argument(format!(
            "neighbor count must lie in [1, m - 1], got k = {k} with m = {m}"
        )));
    }

    let mut rows = Vec::with_capacity(n);
    let mut gamma = Vec::with_capacity(n);
    let mut dist = vec![0.0; m];
    let mut order: Vec<usize> = (0..m).collect();
    for i in 0..n {
        let zi = z.row(i);
        for (j, d) in dist.iter_mut().enumerate() {
            *d = sq_dist(zi, u.row(j));
        }
        for (slot, j) in order.iter_mut().zip(0..m) {
            *slot = j;
        }
        // stable sort keeps lower anchor indices first among ties
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]));

        let nearest = &order[..k];
        let denom = if k < m {
            let edge = dist[order[k]];
            nearest.iter().map(|&j| edge - dist[j]).sum::<f64>()
        } else {
            0.0
        };
        let row: Vec<(usize, f64)> = if denom > 0.0 {
            let edge = dist[order[k]];
            nearest
                .iter()
                .map(|&j| (j, (edge - dist[j]) / denom))
                .filter(|&(_, s)| s > 0.0)
                .collect()
        } else {
            nearest.iter().map(|&j| (j, 1.0 / k as f64)).collect()
        };
        gamma.push(denom / 2.0);
        rows.push(row);
    }

    let s = SparseRows::from_row_entries(m, &rows)?;
    let degrees = s.col_sums();
    Ok(AnchorGraph {
        k,
        s: Arc::new(s),
        degrees,
        gamma,
    })
}

/// Clamps the configured neighbor count to what `m` anchors allow.
pub fn effective_neighbors(k: usize, m: usize) -> usize {
    if m <= 1 {
        1
    } else {
        k.clamp(1, m - 1)
    }
}

/// `Â = D⁻¹ Sᵀ S` (m×m).
pub fn propagation_operator(graph: &AnchorGraph) -> Matrix {
    let m = graph.m();
    let mut out = Matrix::zeros(m, m);
    for i in 0..graph.n() {
        let entries: Vec<(usize, f64)> = graph.row(i).collect();
        for &(j, sj) in &entries {
            let row = out.row_mut(j);
            for &(l, sl) in &entries {
                row[l] += sj * sl;
            }
        }
    }
    for (j, inv) in graph.inv_degrees().into_iter().enumerate() {
        for x in out.row_mut(j) {
            *x *= inv;
        }
    }
    out
}

/// `G = S D⁻¹ Sᵀ` (n×n), refused above [`FULL_GRAPH_CAP`] samples.
pub fn full_sample_graph(graph: &AnchorGraph) -> Result<Matrix> {
    full_sample_graph_capped(graph, FULL_GRAPH_CAP)
}

pub fn full_sample_graph_capped(graph: &AnchorGraph, cap: usize) -> Result<Matrix> {
    let n = graph.n();
    if n > cap {
        return Err(DmacError::Capacity(format!(
            "full sample graph for n = {n} exceeds the cap of {cap}; use the trace-form structure loss instead"
        )));
    }
    let inv = graph.inv_degrees();
    let rows: Vec<Vec<(usize, f64)>> = (0..n).map(|i| graph.row(i).collect()).collect();
    let mut g = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            // both rows are short and sorted by distance, not index
            for &(a, sa) in &rows[i] {
                for &(b, sb) in &rows[j] {
                    if a == b {
                        acc += sa * sb * inv[a];
                    }
                }
            }
            g[(i, j)] = acc;
        }
    }
    Ok(g)
}
