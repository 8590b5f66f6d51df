//! Seeded synthetic domains: stochastic-block-model topology, block-wise
//! Gaussian features under a per-domain shift, and the two standard anomaly
//! injections (dense cliques and far-feature swaps).

use ndarray::Array2;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Default number of candidates examined per attribute anomaly.
pub const DEFAULT_CANDIDATE_POOL: usize = 50;
/// Largest clique used when the generator injects structural anomalies.
pub const GENERATOR_CLIQUE_SIZE: usize = 10;
/// Standard deviation of block centroids around the origin.
pub const CENTROID_SPREAD: f64 = 1.5;

/// Feature transform that distinguishes one domain from another.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainShift {
    /// Multiplies every feature after rotation.
    pub scale: f64,
    /// Angle (radians) of the plane rotation applied to each consecutive
    /// feature pair `(0,1), (2,3), ...`.
    pub rotation: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        DomainShift {
            scale: 1.0,
            rotation: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDomainSpec {
    pub num_nodes: usize,
    pub num_blocks: usize,
    pub intra_block_edge_prob: f64,
    pub inter_block_edge_prob: f64,
    pub feature_dim: usize,
    pub feature_domain_shift: DomainShift,
    pub anomaly_ratio: f64,
    pub seed: u64,
}

impl SyntheticDomainSpec {
    pub fn validate(&self) -> Result<()> {
        let prob_ok = |p: f64| (0.0..=1.0).contains(&p);
        if !prob_ok(self.intra_block_edge_prob) || !prob_ok(self.inter_block_edge_prob) {
            return Err(Error::Validation("edge probabilities must lie in [0, 1]".into()));
        }
        if !(self.anomaly_ratio > 0.0 && self.anomaly_ratio < 0.5) {
            return Err(Error::Validation(format!(
                "anomaly_ratio {} outside (0, 0.5)",
                self.anomaly_ratio
            )));
        }
        if self.num_nodes < 2 || self.num_blocks == 0 || self.num_blocks > self.num_nodes {
            return Err(Error::Validation(
                "need at least 2 nodes and between 1 and num_nodes blocks".into(),
            ));
        }
        if self.feature_dim == 0 {
            return Err(Error::Validation("feature_dim must be positive".into()));
        }
        if !self.feature_domain_shift.scale.is_finite()
            || self.feature_domain_shift.scale == 0.0
            || !self.feature_domain_shift.rotation.is_finite()
        {
            return Err(Error::Validation("domain shift must be finite with non-zero scale".into()));
        }
        Ok(())
    }

    /// `ceil(ratio * N)`, guarded against representation error in the product.
    pub fn anomaly_count(&self) -> usize {
        ((self.anomaly_ratio * self.num_nodes as f64) - 1e-9).ceil() as usize
    }

    pub fn block_of(&self, node: usize) -> usize {
        node * self.num_blocks / self.num_nodes
    }
}

/// Samples the domain described by `spec`; a pure function of the spec.
pub fn generate_synthetic_domain(spec: &SyntheticDomainSpec, name: &str) -> Result<Graph> {
    spec.validate()?;
    let n = spec.num_nodes;
    let total = spec.anomaly_count();
    if total == 0 || total > n / 2 {
        return Err(Error::Validation(format!(
            "anomaly_ratio {} yields an infeasible count {total} for {n} nodes",
            spec.anomaly_ratio
        )));
    }

    let mut topo_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 1));
    let mut edges = Vec::new();
    for i in 0..n {
        let bi = spec.block_of(i);
        for j in (i + 1)..n {
            let p = if spec.block_of(j) == bi {
                spec.intra_block_edge_prob
            } else {
                spec.inter_block_edge_prob
            };
            if p > 0.0 && topo_rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }

    let d = spec.feature_dim;
    let mut feat_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, 2));
    let spread = Normal::new(0.0, CENTROID_SPREAD).expect("positive spread");
    let centroids =
        Array2::from_shape_fn((spec.num_blocks, d), |_| spread.sample(&mut feat_rng));
    let mut features = Array2::from_shape_fn((n, d), |(i, j)| {
        centroids[[spec.block_of(i), j]] + feat_rng.sample::<f64, _>(StandardNormal)
    });
    apply_shift(&mut features, spec.feature_domain_shift);

    let (graph, _) = Graph::from_edges(name, features, &edges, Some(vec![0; n]))?;

    let structural = total / 2;
    let mut sizes = vec![GENERATOR_CLIQUE_SIZE; structural / GENERATOR_CLIQUE_SIZE];
    let rem = structural % GENERATOR_CLIQUE_SIZE;
    if rem >= 2 {
        sizes.push(rem);
    }
    let mut graph = graph;
    let mut placed = 0;
    for (k, &size) in sizes.iter().enumerate() {
        graph = inject_structural_anomalies(&graph, 1, size, derive_seed(spec.seed, 100 + k as u64))?;
        placed += size;
    }
    graph = inject_attribute_anomalies(
        &graph,
        total - placed,
        DEFAULT_CANDIDATE_POOL.min(n - 1),
        derive_seed(spec.seed, 3),
    )?;
    debug_assert_eq!(graph.num_anomalies(), total);
    Ok(graph)
}

fn apply_shift(features: &mut Array2<f64>, shift: DomainShift) {
    let (c, s) = (shift.rotation.cos(), shift.rotation.sin());
    for mut row in features.rows_mut() {
        let d = row.len();
        let mut k = 0;
        while k + 1 < d {
            let (a, b) = (row[k], row[k + 1]);
            row[k] = c * a - s * b;
            row[k + 1] = s * a + c * b;
            k += 2;
        }
        row.mapv_inplace(|v| v * shift.scale);
    }
}

fn normal_nodes(g: &Graph) -> Vec<usize> {
    match g.labels() {
        Some(labels) => (0..g.num_nodes()).filter(|&i| labels[i] == 0).collect(),
        None => (0..g.num_nodes()).collect(),
    }
}

fn labels_or_zero(g: &Graph) -> Vec<u8> {
    g.labels().map_or_else(|| vec![0; g.num_nodes()], <[u8]>::to_vec)
}

/// Fully connects `num_cliques` disjoint groups of `clique_size` currently
/// normal nodes and labels every member anomalous.
pub fn inject_structural_anomalies(
    g: &Graph,
    num_cliques: usize,
    clique_size: usize,
    seed: u64,
) -> Result<Graph> {
    let needed = num_cliques * clique_size;
    if needed == 0 {
        return Ok(g.clone());
    }
    let pool = normal_nodes(g);
    if needed > pool.len() {
        return Err(Error::Validation(format!(
            "{num_cliques} cliques of size {clique_size} need {needed} nodes; only {} normal nodes available",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: Vec<usize> = index::sample(&mut rng, pool.len(), needed)
        .into_iter()
        .map(|k| pool[k])
        .collect();

    let mut labels = labels_or_zero(g);
    let mut extra = Vec::new();
    for members in chosen.chunks(clique_size) {
        for (a, &u) in members.iter().enumerate() {
            labels[u] = 1;
            for &v in &members[a + 1..] {
                extra.push((u, v));
            }
        }
    }
    g.with_added_edges(&extra)?.with_labels(labels)
}

/// Replaces the features of `num_targets` currently normal nodes with the
/// row of the farthest (Euclidean) among `candidate_pool` random other nodes,
/// and labels them anomalous. Distances use the features before injection.
pub fn inject_attribute_anomalies(
    g: &Graph,
    num_targets: usize,
    candidate_pool: usize,
    seed: u64,
) -> Result<Graph> {
    let n = g.num_nodes();
    if n < 2 {
        return Err(Error::Validation("attribute injection needs at least 2 nodes".into()));
    }
    if num_targets == 0 {
        return Ok(g.clone());
    }
    if candidate_pool == 0 || candidate_pool > n - 1 {
        return Err(Error::Validation(format!(
            "candidate pool {candidate_pool} must be in 1..={}",
            n - 1
        )));
    }
    let pool = normal_nodes(g);
    if num_targets > pool.len() {
        return Err(Error::Validation(format!(
            "{num_targets} attribute anomalies requested; only {} normal nodes available",
            pool.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets: Vec<usize> = index::sample(&mut rng, pool.len(), num_targets)
        .into_iter()
        .map(|k| pool[k])
        .collect();

    let original = g.features();
    let mut features = original.clone();
    let mut labels = labels_or_zero(g);
    for &t in &targets {
        // candidates are drawn from the n-1 nodes other than t
        let far = index::sample(&mut rng, n - 1, candidate_pool)
            .into_iter()
            .map(|k| if k >= t { k + 1 } else { k })
            .map(|c| {
                let d2: f64 = original
                    .row(t)
                    .iter()
                    .zip(original.row(c))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (c, d2)
            })
            .fold(None, |best: Option<(usize, f64)>, (c, d2)| match best {
                Some((_, bd)) if bd >= d2 => best,
                _ => Some((c, d2)),
            })
            .map(|(c, _)| c)
            .expect("non-empty candidate pool");
        features.row_mut(t).assign(&original.row(far));
        labels[t] = 1;
    }
    g.clone().with_features(features)?.with_labels(labels)
}
