//! Low-order affinity channel.
//!
//! Two cheap encoders map each node into a latent space: a one-layer GCN over
//! the plain normalized adjacency, `relu(A . X . W)`, and a structure-free
//! projection `relu((X . W1) . W2)` with a single outer nonlinearity. A node's
//! affinity is its average cosine similarity to its neighbors, summed over
//! both embeddings, so it ranges over `[-2, 2]` and high values mean the node
//! agrees with its neighborhood.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::diff::{init_params, relu, relu_backward, spmm, Objective, ParamStore};
use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::par;
use crate::scores::ScoreVector;

pub const GCN_WEIGHT: &str = "gcn";
pub const MLP_IN_WEIGHT: &str = "mlp_in";
pub const MLP_OUT_WEIGHT: &str = "mlp_out";

const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AffinityConfig {
    pub hidden_dim: usize,
    pub bottleneck_dim: usize,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        AffinityConfig {
            hidden_dim: 64,
            bottleneck_dim: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityEncoder {
    config: AffinityConfig,
    input_dim: usize,
    params: ParamStore,
}

/// Intermediate values of both branches.
#[derive(Debug, Clone)]
pub struct AffinityForward {
    /// `A . X` (constant per graph).
    ax: Array2<f64>,
    gcn_pre: Array2<f64>,
    pub h_bar: Array2<f64>,
    /// `X . W1`.
    bottleneck: Array2<f64>,
    mlp_pre: Array2<f64>,
    pub h_hat: Array2<f64>,
}

impl AffinityEncoder {
    pub fn new(config: AffinityConfig, input_dim: usize, seed: u64) -> Result<Self> {
        if config.hidden_dim == 0 || config.bottleneck_dim == 0 {
            return Err(Error::Validation("affinity dims must be positive".into()));
        }
        let params = init_params(
            &[
                (GCN_WEIGHT, input_dim, config.hidden_dim),
                (MLP_IN_WEIGHT, input_dim, config.bottleneck_dim),
                (MLP_OUT_WEIGHT, config.bottleneck_dim, config.hidden_dim),
            ],
            seed,
        )?;
        Ok(AffinityEncoder {
            config,
            input_dim,
            params,
        })
    }

    pub fn from_params(config: AffinityConfig, params: ParamStore) -> Result<Self> {
        let input_dim = params.value(GCN_WEIGHT)?.nrows();
        let expect = [
            (GCN_WEIGHT, input_dim, config.hidden_dim),
            (MLP_IN_WEIGHT, input_dim, config.bottleneck_dim),
            (MLP_OUT_WEIGHT, config.bottleneck_dim, config.hidden_dim),
        ];
        for (name, r, c) in expect {
            let got = params.value(name)?.dim();
            if got != (r, c) {
                return Err(Error::Shape(format!("{name} is {got:?}, expected ({r}, {c})")));
            }
        }
        if params.len() != expect.len() {
            return Err(Error::Validation("unexpected affinity parameters".into()));
        }
        Ok(AffinityEncoder {
            config,
            input_dim,
            params,
        })
    }

    pub fn config(&self) -> &AffinityConfig {
        &self.config
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// `relu(A . X . W)` over the adjacency without self-loops.
    pub fn encode_gcn(&self, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let ax = propagate_plain(adj, x)?;
        Ok(relu(&check_dot(ax.view(), self.params.value(GCN_WEIGHT)?)?))
    }

    /// `relu((X . W1) . W2)`, row-wise and independent of structure.
    pub fn encode_mlp(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let q = check_dot(x, self.params.value(MLP_IN_WEIGHT)?)?;
        Ok(relu(&q.dot(self.params.value(MLP_OUT_WEIGHT)?)))
    }

    pub fn forward(&self, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<AffinityForward> {
        let ax = propagate_plain(adj, x)?;
        forward_with(&self.params, ax, x)
    }

    /// Affinity loss on one graph; accumulates its gradient into the encoder.
    pub fn accumulate_loss(&mut self, g: &Graph, ax: &Array2<f64>, x: ArrayView2<'_, f64>) -> Result<AffinityLoss> {
        loss_and_backward(&mut self.params, g, ax.clone(), x)
    }
}

/// `A . X` for the GCN branch; `A` must not carry self-loops.
pub fn propagate_plain(adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if adj.with_self_loops() {
        return Err(Error::Validation("the GCN branch expects an adjacency without self-loops".into()));
    }
    spmm(adj, x)
}

fn check_dot(a: ArrayView2<'_, f64>, w: &Array2<f64>) -> Result<Array2<f64>> {
    if a.ncols() != w.nrows() {
        return Err(Error::Shape(format!(
            "input has {} columns, weight expects {}",
            a.ncols(),
            w.nrows()
        )));
    }
    Ok(a.dot(w))
}

fn forward_with(params: &ParamStore, ax: Array2<f64>, x: ArrayView2<'_, f64>) -> Result<AffinityForward> {
    let gcn_pre = check_dot(ax.view(), params.value(GCN_WEIGHT)?)?;
    let h_bar = relu(&gcn_pre);
    let bottleneck = check_dot(x, params.value(MLP_IN_WEIGHT)?)?;
    let mlp_pre = bottleneck.dot(params.value(MLP_OUT_WEIGHT)?);
    let h_hat = relu(&mlp_pre);
    if h_bar.iter().chain(h_hat.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("affinity embeddings are not finite".into()));
    }
    Ok(AffinityForward {
        ax,
        gcn_pre,
        h_bar,
        bottleneck,
        mlp_pre,
        h_hat,
    })
}

/// Raw affinity scores plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityScores {
    pub scores: ScoreVector,
    /// Nodes without neighbors; they receive the mean of the defined scores.
    pub isolated: usize,
    /// Embedding rows (either branch) with zero norm; their cosines count as 0.
    pub zero_norm_rows: usize,
}

fn row_norms(h: &Array2<f64>) -> Vec<f64> {
    h.rows().into_iter().map(|r| r.dot(&r).sqrt()).collect()
}

fn cosine(h: &Array2<f64>, norms: &[f64], i: usize, j: usize) -> f64 {
    if norms[i] <= ZERO_NORM || norms[j] <= ZERO_NORM {
        0.0
    } else {
        h.row(i).dot(&h.row(j)) / (norms[i] * norms[j])
    }
}

fn check_rows(h_bar: &Array2<f64>, h_hat: &Array2<f64>, g: &Graph) -> Result<()> {
    let n = g.num_nodes();
    if h_bar.nrows() != n || h_hat.nrows() != n {
        return Err(Error::Shape(format!(
            "embeddings have {}/{} rows for {n} nodes",
            h_bar.nrows(),
            h_hat.nrows()
        )));
    }
    Ok(())
}

/// Average neighbor cosine similarity in both embeddings.
pub fn affinity_score(h_bar: &Array2<f64>, h_hat: &Array2<f64>, g: &Graph) -> Result<AffinityScores> {
    check_rows(h_bar, h_hat, g)?;
    let nb = row_norms(h_bar);
    let nh = row_norms(h_hat);
    let raw: Vec<Option<f64>> = par::map_range(g.num_nodes(), |i| {
        let nbrs = g.neighbors(i);
        if nbrs.is_empty() {
            return None;
        }
        let total: f64 = nbrs
            .iter()
            .map(|&j| cosine(h_bar, &nb, i, j) + cosine(h_hat, &nh, i, j))
            .sum();
        Some(total / nbrs.len() as f64)
    });
    let defined: Vec<f64> = raw.iter().flatten().copied().collect();
    let fill = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    let isolated = raw.len() - defined.len();
    let zero_norm_rows = nb
        .iter()
        .chain(&nh)
        .filter(|&&v| v <= ZERO_NORM)
        .count();
    Ok(AffinityScores {
        scores: ScoreVector::raw(raw.into_iter().map(|v| v.unwrap_or(fill)).collect()),
        isolated,
        zero_norm_rows,
    })
}

#[derive(Debug, Clone)]
pub struct AffinityLoss {
    /// `-sum_i AS(v_i)`, isolated nodes contributing the graph mean.
    pub value: f64,
    pub scores: AffinityScores,
    pub d_h_bar: Array2<f64>,
    pub d_h_hat: Array2<f64>,
}

/// Affinity-maximization loss and its gradient w.r.t. both embeddings.
///
/// Isolated nodes take the mean of the defined affinities, so with `k`
/// isolated among `N` nodes the loss is `-(1 + k/(N-k)) * sum_defined AS`;
/// the gradient follows that exactly. A graph with no edges has a constant
/// loss of zero.
pub fn affinity_loss(h_bar: &Array2<f64>, h_hat: &Array2<f64>, g: &Graph) -> Result<AffinityLoss> {
    let scores = affinity_score(h_bar, h_hat, g)?;
    let n = g.num_nodes();
    let defined = n - scores.isolated;
    let value = -scores.scores.values().iter().sum::<f64>();
    if defined == 0 {
        return Ok(AffinityLoss {
            value: 0.0,
            scores,
            d_h_bar: Array2::zeros(h_bar.raw_dim()),
            d_h_hat: Array2::zeros(h_hat.raw_dim()),
        });
    }
    let scale = n as f64 / defined as f64;
    let inv_deg: Vec<f64> = (0..n)
        .map(|i| match g.degree(i) {
            0 => 0.0,
            d => 1.0 / d as f64,
        })
        .collect();

    let branch_grad = |h: &Array2<f64>| -> Array2<f64> {
        let norms = row_norms(h);
        let mut grad = Array2::zeros(h.raw_dim());
        par::for_each_row_mut(&mut grad, |i, mut row| {
            if norms[i] <= ZERO_NORM {
                return;
            }
            let hi = h.row(i);
            for &j in g.neighbors(i) {
                if norms[j] <= ZERO_NORM {
                    continue;
                }
                let c = hi.dot(&h.row(j)) / (norms[i] * norms[j]);
                let coef = -scale * (inv_deg[i] + inv_deg[j]) / norms[i];
                // d cos / d h_i = (u_j - c u_i) / |h_i|
                row.scaled_add(coef / norms[j], &h.row(j));
                row.scaled_add(-coef * c / norms[i], &hi);
            }
        });
        grad
    };

    Ok(AffinityLoss {
        value,
        d_h_bar: branch_grad(h_bar),
        d_h_hat: branch_grad(h_hat),
        scores,
    })
}

fn loss_and_backward(params: &mut ParamStore, g: &Graph, ax: Array2<f64>, x: ArrayView2<'_, f64>) -> Result<AffinityLoss> {
    let fwd = forward_with(params, ax, x)?;
    let loss = affinity_loss(&fwd.h_bar, &fwd.h_hat, g)?;
    if !loss.value.is_finite() {
        return Err(Error::Numerical(format!("affinity loss is {}", loss.value)));
    }

    let mut dz = loss.d_h_bar.clone();
    relu_backward(&mut dz, &fwd.gcn_pre);
    params.get_mut(GCN_WEIGHT)?.grad += &fwd.ax.t().dot(&dz);

    let mut dz = loss.d_h_hat.clone();
    relu_backward(&mut dz, &fwd.mlp_pre);
    params.get_mut(MLP_OUT_WEIGHT)?.grad += &fwd.bottleneck.t().dot(&dz);
    let dq = dz.dot(&params.value(MLP_OUT_WEIGHT)?.t());
    params.get_mut(MLP_IN_WEIGHT)?.grad += &x.t().dot(&dq);
    Ok(loss)
}

/// The affinity loss as a function of `W`, `W1`, `W2`, for gradient checks.
pub struct AffinityObjective<'a> {
    pub graph: &'a Graph,
    pub ax: &'a Array2<f64>,
    pub x: ArrayView2<'a, f64>,
}

impl Objective for AffinityObjective<'_> {
    fn loss_and_grad(&self, params: &mut ParamStore) -> Result<f64> {
        Ok(loss_and_backward(params, self.graph, self.ax.clone(), self.x)?.value)
    }

    fn loss(&self, params: &ParamStore) -> Result<f64> {
        let fwd = forward_with(params, self.ax.clone(), self.x)?;
        Ok(affinity_loss(&fwd.h_bar, &fwd.h_hat, self.graph)?.value)
    }

    fn activation_pattern(&self, params: &ParamStore) -> Result<Option<Vec<bool>>> {
        let fwd = forward_with(params, self.ax.clone(), self.x)?;
        Ok(Some(
            fwd.gcn_pre
                .iter()
                .chain(fwd.mlp_pre.iter())
                .map(|&v| v > 0.0)
                .collect(),
        ))
    }
}
