use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ModelArtifact;
use crate::diff::{Adam, AdamConfig};
use crate::error::{Error, Result};
use crate::graph::{symmetric_normalize, FeatureProjector, Graph, NormalizedAdjacency};
use crate::high_order::{residual_score, HighOrderConfig, HighOrderEncoder};
use crate::low_order::{affinity_score, propagate_plain, AffinityConfig, AffinityEncoder};
use crate::scores::ScoreVector;
use crate::seed::derive_seed;

/// Source score pools are subsampled to at most this many values.
pub const MAX_POOL_SIZE: usize = 10_000;

const STREAM_HIGH_INIT: u64 = 1;
const STREAM_LOW_INIT: u64 = 2;
const STREAM_PAIRS: u64 = 3;
pub(crate) const STREAM_PROJECTION: u64 = 4;
pub(crate) const STREAM_SCORING: u64 = 5;
const STREAM_POOL: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: AdamConfig,
    /// Propagation hops `l`.
    pub num_hops: usize,
    /// Hidden width `d_h` of the high-order encoder.
    pub hidden_dim: usize,
    /// Cosine margin of the contrastive hinge.
    pub margin: f64,
    pub affinity_hidden_dim: usize,
    pub affinity_bottleneck_dim: usize,
    /// Shared latent width `d_u` after per-graph PCA.
    pub latent_dim: usize,
    /// Reference sample size for residual scoring.
    pub n_k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let ho = HighOrderConfig::default();
        let lo = AffinityConfig::default();
        TrainConfig {
            epochs: 300,
            optimizer: AdamConfig::default(),
            num_hops: ho.num_hops,
            hidden_dim: ho.hidden_dim,
            margin: ho.margin,
            affinity_hidden_dim: lo.hidden_dim,
            affinity_bottleneck_dim: lo.bottleneck_dim,
            latent_dim: 64,
            n_k: 256,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn high_order(&self) -> HighOrderConfig {
        HighOrderConfig {
            num_hops: self.num_hops,
            hidden_dim: self.hidden_dim,
            margin: self.margin,
        }
    }

    pub fn affinity(&self) -> AffinityConfig {
        AffinityConfig {
            hidden_dim: self.affinity_hidden_dim,
            bottleneck_dim: self.affinity_bottleneck_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.high_order().validate()?;
        if self.affinity_hidden_dim == 0 || self.affinity_bottleneck_dim == 0 {
            return Err(Error::Validation("affinity dims must be positive".into()));
        }
        if self.latent_dim == 0 || self.n_k == 0 {
            return Err(Error::Validation("latent_dim and n_k must be positive".into()));
        }
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0 && o.learning_rate.is_finite())
            || !(0.0..1.0).contains(&o.beta1)
            || !(0.0..1.0).contains(&o.beta2)
            || o.epsilon.is_nan() || o.epsilon <= 0.0
        {
            return Err(Error::Validation(format!("invalid optimizer settings {o:?}")));
        }
        Ok(())
    }
}

/// A graph projected to the latent width with both normalized adjacencies.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub graph: Graph,
    pub x: Array2<f64>,
    pub adj_high: NormalizedAdjacency,
    pub adj_low: NormalizedAdjacency,
    /// `A . X` over the plain adjacency, reused by the GCN branch.
    pub ax: Array2<f64>,
}

impl PreparedGraph {
    pub fn new(graph: Graph, latent_dim: usize, seed: u64) -> Result<Self> {
        let projector = FeatureProjector::fit(graph.features().view(), latent_dim, seed)?;
        let x = projector.apply(graph.features().view())?;
        let adj_high = symmetric_normalize(&graph, true);
        let adj_low = symmetric_normalize(&graph, false);
        let ax = propagate_plain(&adj_low, x.view())?;
        Ok(PreparedGraph {
            graph,
            x,
            adj_high,
            adj_low,
            ax,
        })
    }
}

/// Both normalized channels of one graph under frozen encoders.
#[derive(Debug, Clone)]
pub struct ChannelScores {
    pub rs_raw: ScoreVector,
    pub as_raw: ScoreVector,
    pub rs: ScoreVector,
    pub as_: ScoreVector,
    /// `1 - as_`.
    pub structural: ScoreVector,
    pub isolated: usize,
    pub zero_norm_rows: usize,
}

pub fn channel_scores(
    high: &HighOrderEncoder,
    low: &AffinityEncoder,
    g: &PreparedGraph,
    n_k: usize,
    seed: u64,
) -> Result<ChannelScores> {
    let r = high.residuals(&g.adj_high, g.x.view())?;
    let rs_raw = residual_score(&r, n_k, seed)?;
    let fwd = low.forward(&g.adj_low, g.x.view())?;
    let aff = affinity_score(&fwd.h_bar, &fwd.h_hat, &g.graph)?;
    let rs = rs_raw.min_max_normalized();
    let as_ = aff.scores.min_max_normalized();
    let structural = as_.complement()?;
    Ok(ChannelScores {
        rs_raw,
        as_raw: aff.scores,
        rs,
        as_,
        structural,
        isolated: aff.isolated,
        zero_norm_rows: aff.zero_norm_rows,
    })
}

/// Losses measured at the start of one epoch, before its updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub high: f64,
    pub low: f64,
    pub total: f64,
    /// `(high, low)` per source graph, in input order.
    pub per_graph: Vec<(f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub artifact: ModelArtifact,
    pub history: Vec<EpochLoss>,
}

struct Source {
    prepared: PreparedGraph,
    normal: Vec<usize>,
    anomaly: Vec<usize>,
}

fn split_labels(g: &Graph) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels = g
        .labels()
        .ok_or_else(|| Error::Validation(format!("source graph '{}' has no labels", g.name())))?;
    let normal: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    let anomaly: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != 0).collect();
    if normal.is_empty() || anomaly.is_empty() {
        return Err(Error::Validation(format!(
            "source graph '{}' must contain both normal and anomalous nodes",
            g.name()
        )));
    }
    Ok((normal, anomaly))
}

fn pool(values: Vec<f64>, seed: u64) -> Vec<f64> {
    if values.len() <= MAX_POOL_SIZE {
        return values;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, values.len(), MAX_POOL_SIZE).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| values[i]).collect()
}

/// Joint training on labeled sources: per epoch and per graph, the
/// contrastive loss and the affinity loss are evaluated and each encoder
/// takes one Adam step. Afterwards both channels are scored on every source
/// to fill the artifact's score pools.
pub fn train(sources: &[Graph], cfg: &TrainConfig) -> Result<TrainOutput> {
    cfg.validate()?;
    if sources.is_empty() {
        return Err(Error::Validation("at least one source graph is required".into()));
    }
    let prepared: Vec<Source> = sources
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let (normal, anomaly) = split_labels(g)?;
            let seed = derive_seed(derive_seed(cfg.seed, STREAM_PROJECTION), i as u64);
            Ok(Source {
                prepared: PreparedGraph::new(g.clone(), cfg.latent_dim, seed)?,
                normal,
                anomaly,
            })
        })
        .collect::<Result<_>>()?;

    let mut high = HighOrderEncoder::new(cfg.high_order(), cfg.latent_dim, derive_seed(cfg.seed, STREAM_HIGH_INIT))?;
    let mut low = AffinityEncoder::new(cfg.affinity(), cfg.latent_dim, derive_seed(cfg.seed, STREAM_LOW_INIT))?;
    let mut adam_high = Adam::new(cfg.optimizer, high.params());
    let mut adam_low = Adam::new(cfg.optimizer, low.params());
    let pair_base = derive_seed(cfg.seed, STREAM_PAIRS);

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut per_graph = Vec::with_capacity(prepared.len());
        for (gi, src) in prepared.iter().enumerate() {
            let p = &src.prepared;
            let pair_seed = derive_seed(pair_base, (epoch * prepared.len() + gi) as u64);
            let lh = high.accumulate_loss(&p.adj_high, p.x.view(), &src.normal, &src.anomaly, pair_seed)?;
            let ll = low.accumulate_loss(&p.graph, &p.ax, p.x.view())?;
            if !(lh.value + ll.value).is_finite() {
                return Err(Error::Numerical(format!(
                    "training diverged at epoch {epoch} on '{}'",
                    p.graph.name()
                )));
            }
            adam_high.step(high.params_mut())?;
            adam_low.step(low.params_mut())?;
            per_graph.push((lh.value, ll.value));
        }
        let high_sum: f64 = per_graph.iter().map(|p| p.0).sum();
        let low_sum: f64 = per_graph.iter().map(|p| p.1).sum();
        log::debug!("epoch {epoch}: high {high_sum:.6} low {low_sum:.6}");
        history.push(EpochLoss {
            epoch,
            high: high_sum,
            low: low_sum,
            total: high_sum + low_sum,
            per_graph,
        });
    }

    let scoring_seed = derive_seed(cfg.seed, STREAM_SCORING);
    let mut node_pool = Vec::new();
    let mut struct_pool = Vec::new();
    for (gi, src) in prepared.iter().enumerate() {
        let ch = channel_scores(&high, &low, &src.prepared, cfg.n_k, derive_seed(scoring_seed, gi as u64))?;
        node_pool.extend_from_slice(ch.rs.values());
        struct_pool.extend_from_slice(ch.structural.values());
    }
    let pool_seed = derive_seed(cfg.seed, STREAM_POOL);
    let artifact = ModelArtifact::new(
        &high,
        &low,
        pool(node_pool, pool_seed),
        pool(struct_pool, pool_seed),
        *cfg,
    )?;
    Ok(TrainOutput { artifact, history })
}
