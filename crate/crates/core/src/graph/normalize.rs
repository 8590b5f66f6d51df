use ndarray::Array2;

use super::Graph;

/// `D^{-1/2} M D^{-1/2}` in CSR form, where `M` is the adjacency with or
/// without added self-loops and `D` is the degree matrix of `M`.
///
/// The matrix is symmetric, so it is its own transpose during backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
    with_self_loops: bool,
}

impl NormalizedAdjacency {
    pub fn num_nodes(&self) -> usize {
        self.row_offsets.len() - 1
    }

    pub fn with_self_loops(&self) -> bool {
        self.with_self_loops
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let n = self.num_nodes();
        let mut m = Array2::zeros((n, n));
        for i in 0..n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                m[[i, j]] = v;
            }
        }
        m
    }
}

/// Symmetrically normalizes the adjacency of `g`. Rows of zero-degree nodes stay empty.
pub fn symmetric_normalize(g: &Graph, add_self_loops: bool) -> NormalizedAdjacency {
    let n = g.num_nodes();
    let loop_weight = usize::from(add_self_loops);
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d = g.degree(i) + loop_weight;
            if d == 0 {
                0.0
            } else {
                1.0 / (d as f64).sqrt()
            }
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(g.col_indices().len() + n * loop_weight);
    let mut values = Vec::with_capacity(col_indices.capacity());
    row_offsets.push(0);
    for i in 0..n {
        let mut diag_pending = add_self_loops;
        for &j in g.neighbors(i) {
            if diag_pending && j > i {
                col_indices.push(i);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
                diag_pending = false;
            }
            col_indices.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        if diag_pending {
            col_indices.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
        }
        row_offsets.push(col_indices.len());
    }

    NormalizedAdjacency {
        row_offsets,
        col_indices,
        values,
        with_self_loops: add_self_loops,
    }
}
