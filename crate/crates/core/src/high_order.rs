//! High-order residual channel.
//!
//! Node features are propagated `l` hops through the self-looped normalized
//! adjacency, `H[k] = relu(A . H[k-1] . W[k])`. Each node is then represented
//! by its residuals against the first hop, `[H[2]-H[1] | ... | H[l]-H[1]]`.
//! Training pulls labeled-normal residuals together in cosine and pushes
//! anomalies below a cosine margin; at inference a node's score is its mean
//! squared distance to a shared random sample of residuals.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{init_params, relu, relu_backward, spmm, Adam, AdamConfig, Objective, ParamStore};
use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::par;
use crate::scores::ScoreVector;
use crate::seed::derive_seed;

/// Above this many normal-anomaly pairs the margin term is estimated from a
/// seeded uniform sample of this many pairs.
pub const MAX_MARGIN_PAIRS: usize = 1_000_000;

/// Residual rows with a norm at or below this are treated as zero.
const ZERO_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HighOrderConfig {
    pub num_hops: usize,
    pub hidden_dim: usize,
    pub margin: f64,
}

impl Default for HighOrderConfig {
    fn default() -> Self {
        HighOrderConfig {
            num_hops: 4,
            hidden_dim: 64,
            margin: 0.1,
        }
    }
}

impl HighOrderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_hops < 2 {
            return Err(Error::Validation(format!(
                "residuals need at least 2 hops, got {}",
                self.num_hops
            )));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Validation("hidden_dim must be positive".into()));
        }
        if !self.margin.is_finite() {
            return Err(Error::Validation("margin must be finite".into()));
        }
        Ok(())
    }

    pub fn residual_width(&self) -> usize {
        (self.num_hops - 1) * self.hidden_dim
    }
}

pub fn hop_param_name(hop: usize) -> String {
    format!("hop{hop}")
}

/// Activations kept for backprop.
#[derive(Debug, Clone)]
pub struct HighOrderForward {
    /// `A . H[k-1]` for each hop.
    propagated: Vec<Array2<f64>>,
    /// `A . H[k-1] . W[k]` before the ReLU.
    pre: Vec<Array2<f64>>,
    /// `H[1..=l]`.
    hidden: Vec<Array2<f64>>,
}

impl HighOrderForward {
    pub fn hidden(&self) -> &[Array2<f64>] {
        &self.hidden
    }

    fn activation_pattern(&self) -> impl Iterator<Item = bool> + '_ {
        self.pre.iter().flat_map(|z| z.iter().map(|&v| v > 0.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HighOrderEncoder {
    config: HighOrderConfig,
    input_dim: usize,
    params: ParamStore,
}

impl HighOrderEncoder {
    pub fn new(config: HighOrderConfig, input_dim: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let names: Vec<String> = (1..=config.num_hops).map(hop_param_name).collect();
        let shapes: Vec<(&str, usize, usize)> = names
            .iter()
            .enumerate()
            .map(|(k, n)| {
                let rows = if k == 0 { input_dim } else { config.hidden_dim };
                (n.as_str(), rows, config.hidden_dim)
            })
            .collect();
        let params = init_params(&shapes, seed)?;
        Ok(HighOrderEncoder {
            config,
            input_dim,
            params,
        })
    }

    /// Rebuilds an encoder from stored weights, checking every shape.
    pub fn from_params(config: HighOrderConfig, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let first = params.value(&hop_param_name(1))?;
        let input_dim = first.nrows();
        for k in 1..=config.num_hops {
            let w = params.value(&hop_param_name(k))?;
            let rows = if k == 1 { input_dim } else { config.hidden_dim };
            if w.dim() != (rows, config.hidden_dim) {
                return Err(Error::Shape(format!(
                    "{} is {:?}, expected ({rows}, {})",
                    hop_param_name(k),
                    w.dim(),
                    config.hidden_dim
                )));
            }
        }
        if params.len() != config.num_hops {
            return Err(Error::Validation(format!(
                "expected {} hop weights, found {}",
                config.num_hops,
                params.len()
            )));
        }
        Ok(HighOrderEncoder {
            config,
            input_dim,
            params,
        })
    }

    pub fn config(&self) -> &HighOrderConfig {
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

    pub fn forward(&self, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<HighOrderForward> {
        forward_with(&self.params, &self.config, adj, x)
    }

    /// `H[1..=l]`.
    pub fn propagate(&self, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Vec<Array2<f64>>> {
        Ok(self.forward(adj, x)?.hidden)
    }

    pub fn residuals(&self, adj: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<ResidualMatrix> {
        residual_embed(&self.propagate(adj, x)?)
    }

    /// Computes the contrastive loss on one labeled graph and accumulates
    /// its gradient into the encoder's parameters.
    pub fn accumulate_loss(
        &mut self,
        adj: &NormalizedAdjacency,
        x: ArrayView2<'_, f64>,
        normal_idx: &[usize],
        anomaly_idx: &[usize],
        pair_seed: u64,
    ) -> Result<ContrastiveLoss> {
        loss_and_backward(&mut self.params, &self.config, adj, x, normal_idx, anomaly_idx, pair_seed)
    }
}

fn forward_with(
    params: &ParamStore,
    config: &HighOrderConfig,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
) -> Result<HighOrderForward> {
    if !adj.with_self_loops() {
        return Err(Error::Validation(
            "high-order propagation expects a self-looped adjacency".into(),
        ));
    }
    let first = params.value(&hop_param_name(1))?;
    if x.ncols() != first.nrows() {
        return Err(Error::Shape(format!(
            "features have {} columns, encoder expects {}",
            x.ncols(),
            first.nrows()
        )));
    }
    let mut propagated = Vec::with_capacity(config.num_hops);
    let mut pre = Vec::with_capacity(config.num_hops);
    let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(config.num_hops);
    for k in 1..=config.num_hops {
        let input = if k == 1 { x } else { hidden[k - 2].view() };
        let p = spmm(adj, input)?;
        let z = p.dot(params.value(&hop_param_name(k))?);
        let h = relu(&z);
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("hop {k} produced non-finite activations")));
        }
        propagated.push(p);
        pre.push(z);
        hidden.push(h);
    }
    Ok(HighOrderForward {
        propagated,
        pre,
        hidden,
    })
}

/// Backpropagates `d_residual` (gradient w.r.t. the residual matrix) into the hop weights.
fn backward_with(
    params: &mut ParamStore,
    config: &HighOrderConfig,
    adj: &NormalizedAdjacency,
    fwd: &HighOrderForward,
    d_residual: &Array2<f64>,
) -> Result<()> {
    let l = config.num_hops;
    let d_h = config.hidden_dim;
    let n = d_residual.nrows();
    let mut d_hidden: Vec<Array2<f64>> = vec![Array2::zeros((n, d_h)); l];
    for k in 2..=l {
        let block = d_residual.slice(s![.., (k - 2) * d_h..(k - 1) * d_h]);
        d_hidden[k - 1] += &block;
        d_hidden[0] -= &block;
    }
    for k in (1..=l).rev() {
        let mut dz = std::mem::take(&mut d_hidden[k - 1]);
        relu_backward(&mut dz, &fwd.pre[k - 1]);
        let name = hop_param_name(k);
        let dw = fwd.propagated[k - 1].t().dot(&dz);
        let dp = dz.dot(&params.value(&name)?.t());
        params.get_mut(&name)?.grad += &dw;
        if k > 1 {
            // the normalized adjacency is symmetric
            let dh = spmm(adj, dp.view())?;
            d_hidden[k - 2] += &dh;
        }
    }
    Ok(())
}

fn loss_and_backward(
    params: &mut ParamStore,
    config: &HighOrderConfig,
    adj: &NormalizedAdjacency,
    x: ArrayView2<'_, f64>,
    normal_idx: &[usize],
    anomaly_idx: &[usize],
    pair_seed: u64,
) -> Result<ContrastiveLoss> {
    let fwd = forward_with(params, config, adj, x)?;
    let r = residual_embed(&fwd.hidden)?;
    let loss = contrastive_loss(&r, normal_idx, anomaly_idx, config.margin, pair_seed)?;
    if !loss.value.is_finite() {
        return Err(Error::Numerical(format!("contrastive loss is {}", loss.value)));
    }
    backward_with(params, config, adj, &fwd, &loss.grad)?;
    Ok(loss)
}

/// `[H[2]-H[1] | H[3]-H[1] | ... | H[l]-H[1]]`, one row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMatrix {
    matrix: Array2<f64>,
    block_width: usize,
}

impl ResidualMatrix {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn from_matrix(matrix: Array2<f64>, block_width: usize) -> Result<Self> {
        if block_width == 0 || !matrix.ncols().is_multiple_of(block_width) {
            return Err(Error::Shape(format!(
                "{} columns are not a multiple of block width {block_width}",
                matrix.ncols()
            )));
        }
        Ok(ResidualMatrix {
            matrix,
            block_width,
        })
    }
}

pub fn residual_embed(hs: &[Array2<f64>]) -> Result<ResidualMatrix> {
    if hs.len() < 2 {
        return Err(Error::Validation(format!(
            "residuals need at least 2 hops, got {}",
            hs.len()
        )));
    }
    let (n, d) = hs[0].dim();
    if hs.iter().any(|h| h.dim() != (n, d)) {
        return Err(Error::Shape("hop representations differ in shape".into()));
    }
    let mut matrix = Array2::zeros((n, (hs.len() - 1) * d));
    for (k, h) in hs.iter().enumerate().skip(1) {
        let mut block = matrix.slice_mut(s![.., (k - 1) * d..k * d]);
        block.assign(h);
        block -= &hs[0];
    }
    Ok(ResidualMatrix {
        matrix,
        block_width: d,
    })
}

/// Value, gradient w.r.t. the residual matrix, and diagnostics of the
/// residual contrastive loss.
#[derive(Debug, Clone)]
pub struct ContrastiveLoss {
    pub value: f64,
    /// `sum_t sum_i (1 - cos(r_t, r_i))` over labeled normals.
    pub normal_term: f64,
    /// `sum_t sum_j max(0, cos(r_t, r_j) - margin)` over normal-anomaly pairs.
    pub margin_term: f64,
    pub grad: Array2<f64>,
    /// Indexed nodes whose residual had zero norm; their pairs are skipped.
    pub skipped_zero_norm: usize,
    pub active_pairs: usize,
    pub pairs_subsampled: bool,
    /// Hinge activity per normal-anomaly pair when all pairs are enumerated.
    pub hinge_pattern: Vec<bool>,
}

fn check_indices(n: usize, normal: &[usize], anomaly: &[usize]) -> Result<()> {
    if normal.is_empty() || anomaly.is_empty() {
        return Err(Error::Validation(
            "contrastive loss needs at least one normal and one anomalous node".into(),
        ));
    }
    let mut seen = vec![0u8; n];
    for &i in normal {
        if i >= n {
            return Err(Error::Validation(format!("normal index {i} out of range")));
        }
        seen[i] |= 1;
    }
    for &j in anomaly {
        if j >= n {
            return Err(Error::Validation(format!("anomaly index {j} out of range")));
        }
        if seen[j] & 1 == 1 {
            return Err(Error::Validation(format!("node {j} is both normal and anomalous")));
        }
        seen[j] |= 2;
    }
    Ok(())
}

/// Residual contrastive loss and its gradient.
///
/// The normal-normal double sum is evaluated exactly through
/// `n^2 - |sum_t u_t|^2` on unit rows `u`, which equals the pairwise sum
/// including the zero-valued diagonal.
pub fn contrastive_loss(
    r: &ResidualMatrix,
    normal_idx: &[usize],
    anomaly_idx: &[usize],
    margin: f64,
    pair_seed: u64,
) -> Result<ContrastiveLoss> {
    let m = &r.matrix;
    let (n, width) = m.dim();
    check_indices(n, normal_idx, anomaly_idx)?;

    let norms: Array1<f64> = m.map_axis(Axis(1), |row| row.dot(&row).sqrt());
    let mut skipped = 0;
    let mut keep = |idx: &[usize]| -> Vec<usize> {
        idx.iter()
            .copied()
            .filter(|&i| {
                let ok = norms[i] > ZERO_NORM;
                if !ok {
                    skipped += 1;
                }
                ok
            })
            .collect()
    };
    let normals = keep(normal_idx);
    let anomalies = keep(anomaly_idx);

    let unit_rows = |idx: &[usize]| -> Array2<f64> {
        let mut u = m.select(Axis(0), idx);
        for (mut row, &i) in u.rows_mut().into_iter().zip(idx) {
            row /= norms[i];
        }
        u
    };
    let u_n = unit_rows(&normals);
    let u_a = unit_rows(&anomalies);

    let total: Array1<f64> = u_n.sum_axis(Axis(0));
    let count = normals.len() as f64;
    let normal_term = count * count - total.dot(&total);

    let mut du_n = Array2::<f64>::zeros(u_n.raw_dim());
    for mut row in du_n.rows_mut() {
        row.scaled_add(-2.0, &total);
    }
    let mut du_a = Array2::<f64>::zeros(u_a.raw_dim());

    let pairs = normals.len() * anomalies.len();
    let mut margin_term = 0.0;
    let mut active_pairs = 0;
    let mut hinge_pattern = Vec::new();
    let subsampled = pairs > MAX_MARGIN_PAIRS;
    if pairs > 0 && !subsampled {
        let cos = u_n.dot(&u_a.t());
        let active = cos.mapv(|c| if c > margin { 1.0 } else { 0.0 });
        margin_term = cos
            .iter()
            .map(|&c| (c - margin).max(0.0))
            .sum::<f64>();
        active_pairs = active.iter().filter(|&&a| a > 0.0).count();
        hinge_pattern = active.iter().map(|&a| a > 0.0).collect();
        du_n += &active.dot(&u_a);
        du_a += &active.t().dot(&u_n);
    } else if subsampled {
        let scale = pairs as f64 / MAX_MARGIN_PAIRS as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(pair_seed);
        for _ in 0..MAX_MARGIN_PAIRS {
            let t = rng.random_range(0..normals.len());
            let j = rng.random_range(0..anomalies.len());
            let c = u_n.row(t).dot(&u_a.row(j));
            if c > margin {
                margin_term += scale * (c - margin);
                active_pairs += 1;
                du_n.row_mut(t).scaled_add(scale, &u_a.row(j));
                du_a.row_mut(j).scaled_add(scale, &u_n.row(t));
            }
        }
    }

    // d/dr of u = r/|r| is (du - u (u.du)) / |r|
    let mut grad = Array2::zeros((n, width));
    let mut scatter = |idx: &[usize], u: &Array2<f64>, du: &Array2<f64>| {
        for (k, &i) in idx.iter().enumerate() {
            let (ur, dur) = (u.row(k), du.row(k));
            let proj = ur.dot(&dur);
            let mut g = grad.row_mut(i);
            g.assign(&dur);
            g.scaled_add(-proj, &ur);
            g /= norms[i];
        }
    };
    scatter(&normals, &u_n, &du_n);
    scatter(&anomalies, &u_a, &du_a);

    Ok(ContrastiveLoss {
        value: normal_term + margin_term,
        normal_term,
        margin_term,
        grad,
        skipped_zero_norm: skipped,
        active_pairs,
        pairs_subsampled: subsampled,
        hinge_pattern,
    })
}

/// Mean squared distance from each residual row to one shared,
/// without-replacement sample of `min(n_k, N)` rows.
pub fn residual_score(r: &ResidualMatrix, n_k: usize, seed: u64) -> Result<ScoreVector> {
    let n = r.num_nodes();
    if n < 2 {
        return Err(Error::Validation(format!("residual scoring needs N >= 2, got {n}")));
    }
    if n_k == 0 {
        return Err(Error::Validation("n_k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = index::sample(&mut rng, n, n_k.min(n)).into_vec();
    sample.sort_unstable();
    Ok(residual_score_against(r, &sample))
}

/// Mean squared distance from each row to the rows in `reference`.
pub fn residual_score_against(r: &ResidualMatrix, reference: &[usize]) -> ScoreVector {
    let m = &r.matrix;
    let inv = 1.0 / reference.len() as f64;
    let values = par::map_range(m.nrows(), |i| {
        let ri = m.row(i);
        let total: f64 = reference
            .iter()
            .map(|&j| {
                ri.iter()
                    .zip(m.row(j))
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
            })
            .sum();
        total * inv
    });
    ScoreVector::raw(values)
}

/// The contrastive loss as a function of the hop weights, for gradient checks.
pub struct ContrastiveObjective<'a> {
    pub config: HighOrderConfig,
    pub adj: &'a NormalizedAdjacency,
    pub x: ArrayView2<'a, f64>,
    pub normal_idx: &'a [usize],
    pub anomaly_idx: &'a [usize],
    pub pair_seed: u64,
}

impl Objective for ContrastiveObjective<'_> {
    fn loss_and_grad(&self, params: &mut ParamStore) -> Result<f64> {
        let loss = loss_and_backward(
            params,
            &self.config,
            self.adj,
            self.x,
            self.normal_idx,
            self.anomaly_idx,
            self.pair_seed,
        )?;
        Ok(loss.value)
    }

    fn loss(&self, params: &ParamStore) -> Result<f64> {
        let fwd = forward_with(params, &self.config, self.adj, self.x)?;
        let r = residual_embed(&fwd.hidden)?;
        Ok(contrastive_loss(&r, self.normal_idx, self.anomaly_idx, self.config.margin, self.pair_seed)?.value)
    }

    fn activation_pattern(&self, params: &ParamStore) -> Result<Option<Vec<bool>>> {
        let fwd = forward_with(params, &self.config, self.adj, self.x)?;
        let r = residual_embed(&fwd.hidden)?;
        let loss = contrastive_loss(&r, self.normal_idx, self.anomaly_idx, self.config.margin, self.pair_seed)?;
        let mut pattern: Vec<bool> = fwd.activation_pattern().collect();
        pattern.extend(loss.hinge_pattern);
        Ok(Some(pattern))
    }
}

/// A labeled graph prepared for high-order training.
pub struct LabeledInput<'a> {
    pub adj: &'a NormalizedAdjacency,
    pub x: ArrayView2<'a, f64>,
    pub normal_idx: &'a [usize],
    pub anomaly_idx: &'a [usize],
}

/// Trains the high-order branch alone: one Adam step per graph per epoch.
/// Returns the trained encoder and the per-epoch summed loss measured before
/// each epoch's updates.
pub fn train_high_order(
    mut encoder: HighOrderEncoder,
    sources: &[LabeledInput<'_>],
    epochs: usize,
    optimizer: AdamConfig,
    seed: u64,
) -> Result<(HighOrderEncoder, Vec<f64>)> {
    if sources.is_empty() {
        return Err(Error::Validation("no source graphs".into()));
    }
    let mut adam = Adam::new(optimizer, encoder.params());
    let mut history = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        for (g, src) in sources.iter().enumerate() {
            let pair_seed = derive_seed(seed, (epoch * sources.len() + g) as u64);
            let loss = encoder.accumulate_loss(src.adj, src.x, src.normal_idx, src.anomaly_idx, pair_seed)?;
            epoch_loss += loss.value;
            adam.step(encoder.params_mut())?;
        }
        history.push(epoch_loss);
    }
    Ok((encoder, history))
}
