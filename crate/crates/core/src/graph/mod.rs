//! Attributed undirected graphs in compressed sparse row form.

mod io;
mod normalize;
mod projection;
pub mod synth;

pub use io::{load_graph, load_labels, save_graph, LoadReport, EDGES_FILE, FEATURES_FILE, LABELS_FILE};
pub use normalize::{symmetric_normalize, NormalizedAdjacency};
pub use projection::{fit_projections, FeatureProjector};

use std::collections::BTreeSet;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sparse symmetric 0/1 adjacency plus a dense feature matrix and optional
/// binary anomaly labels (1 = anomaly).
///
/// Self-loops are never stored; neighbor lists are strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    name: String,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    features: Array2<f64>,
    labels: Option<Vec<u8>>,
}

impl Graph {
    /// Builds a validated graph from an undirected edge list.
    ///
    /// Duplicate and reversed edges collapse into one undirected edge.
    /// Self-loops are dropped; the second element of the result counts them.
    pub fn from_edges(
        name: impl Into<String>,
        features: Array2<f64>,
        edges: &[(usize, usize)],
        labels: Option<Vec<u8>>,
    ) -> Result<(Self, usize)> {
        let n = features.nrows();
        let mut undirected = BTreeSet::new();
        let mut self_loops = 0;
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a == b {
                self_loops += 1;
                continue;
            }
            undirected.insert((a.min(b), a.max(b)));
        }

        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in &undirected {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::with_capacity(2 * undirected.len());
        row_offsets.push(0);
        for mut nbrs in adjacency {
            nbrs.sort_unstable();
            col_indices.extend(nbrs);
            row_offsets.push(col_indices.len());
        }

        let g = Graph {
            name: name.into(),
            row_offsets,
            col_indices,
            features,
            labels,
        };
        g.validate()?;
        Ok((g, self_loops))
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.row_offsets.len() != n + 1 {
            return Err(Error::Validation("row offsets do not match node count".into()));
        }
        if let Some((i, j)) = self
            .features
            .indexed_iter()
            .find(|(_, v)| !v.is_finite())
            .map(|(idx, _)| idx)
        {
            return Err(Error::Validation(format!(
                "feature ({i}, {j}) of graph '{}' is not finite",
                self.name
            )));
        }
        if let Some(labels) = &self.labels {
            if labels.len() != n {
                return Err(Error::Validation(format!(
                    "{} labels for {n} nodes in graph '{}'",
                    labels.len(),
                    self.name
                )));
            }
            if let Some(bad) = labels.iter().find(|&&l| l > 1) {
                return Err(Error::Validation(format!("label {bad} is not 0/1")));
            }
        }
        for i in 0..n {
            let nbrs = self.neighbors(i);
            if nbrs.windows(2).any(|w| w[0] >= w[1]) || nbrs.iter().any(|&j| j >= n || j == i) {
                return Err(Error::Validation(format!("malformed neighbor list at node {i}")));
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.col_indices.len() / 2
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Undirected edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes()).flat_map(move |i| {
            self.neighbors(i)
                .iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Count of label-1 nodes, or zero when unlabeled.
    pub fn num_anomalies(&self) -> usize {
        self.labels
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&v| v == 1).count())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_labels(self, labels: Vec<u8>) -> Result<Self> {
        let g = Graph {
            labels: Some(labels),
            ..self
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_features(self, features: Array2<f64>) -> Result<Self> {
        if features.nrows() != self.num_nodes() {
            return Err(Error::Shape(format!(
                "{} feature rows for {} nodes",
                features.nrows(),
                self.num_nodes()
            )));
        }
        let g = Graph { features, ..self };
        g.validate()?;
        Ok(g)
    }

    /// A copy with labels removed; scoring code only ever sees this form.
    pub fn without_labels(&self) -> Self {
        Graph {
            labels: None,
            ..self.clone()
        }
    }

    /// A copy with `extra` undirected edges merged in.
    pub fn with_added_edges(&self, extra: &[(usize, usize)]) -> Result<Self> {
        let mut all: Vec<(usize, usize)> = self.edges().collect();
        all.extend_from_slice(extra);
        let (g, _) = Graph::from_edges(
            self.name.clone(),
            self.features.clone(),
            &all,
            self.labels.clone(),
        )?;
        Ok(g)
    }
}
