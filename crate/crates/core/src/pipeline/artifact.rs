use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainConfig;
use crate::diff::{ParamStore, WeightMatrix};
use crate::error::{Error, Result};
use crate::high_order::{HighOrderConfig, HighOrderEncoder};
use crate::low_order::{AffinityConfig, AffinityEncoder};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HighOrderSection {
    pub l: usize,
    pub d_h: usize,
    pub margin: f64,
    pub weights: BTreeMap<String, WeightMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowOrderSection {
    pub hidden: usize,
    pub bottleneck: usize,
    pub weights: BTreeMap<String, WeightMatrix>,
}

/// A trained detector plus the source-side score samples needed for drift
/// estimation on unseen targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub high_order: HighOrderSection,
    pub low_order: LowOrderSection,
    /// Normalized residual scores pooled over all source graphs.
    pub source_node_scores: Vec<f64>,
    /// Normalized structural scores (`1 - affinity`) pooled over all sources.
    pub source_struct_scores: Vec<f64>,
    pub train_config: TrainConfig,
}

fn to_weights(params: &ParamStore) -> BTreeMap<String, WeightMatrix> {
    params
        .iter()
        .map(|(name, p)| (name.to_string(), WeightMatrix(p.value.clone())))
        .collect()
}

fn to_store(weights: &BTreeMap<String, WeightMatrix>, order: &[String], seed: u64) -> Result<ParamStore> {
    if weights.len() != order.len() {
        return Err(Error::Validation(format!(
            "expected weights {order:?}, found {:?}",
            weights.keys().collect::<Vec<_>>()
        )));
    }
    let mut store = ParamStore::empty(seed);
    for name in order {
        let w = weights
            .get(name)
            .ok_or_else(|| Error::Validation(format!("missing weight '{name}'")))?;
        store.insert(name.clone(), w.0.clone())?;
    }
    Ok(store)
}

impl ModelArtifact {
    pub fn new(
        high: &HighOrderEncoder,
        low: &AffinityEncoder,
        source_node_scores: Vec<f64>,
        source_struct_scores: Vec<f64>,
        train_config: TrainConfig,
    ) -> Result<Self> {
        let hc = high.config();
        let lc = low.config();
        let artifact = ModelArtifact {
            format_version: FORMAT_VERSION,
            high_order: HighOrderSection {
                l: hc.num_hops,
                d_h: hc.hidden_dim,
                margin: hc.margin,
                weights: to_weights(high.params()),
            },
            low_order: LowOrderSection {
                hidden: lc.hidden_dim,
                bottleneck: lc.bottleneck_dim,
                weights: to_weights(low.params()),
            },
            source_node_scores,
            source_struct_scores,
            train_config,
        };
        artifact.validate()?;
        Ok(artifact)
    }

    pub fn high_order_config(&self) -> HighOrderConfig {
        HighOrderConfig {
            num_hops: self.high_order.l,
            hidden_dim: self.high_order.d_h,
            margin: self.high_order.margin,
        }
    }

    pub fn affinity_config(&self) -> AffinityConfig {
        AffinityConfig {
            hidden_dim: self.low_order.hidden,
            bottleneck_dim: self.low_order.bottleneck,
        }
    }

    /// Rebuilds both encoders, checking every weight shape.
    pub fn encoders(&self) -> Result<(HighOrderEncoder, AffinityEncoder)> {
        let hc = self.high_order_config();
        hc.validate()?;
        let hop_names: Vec<String> = (1..=hc.num_hops).map(crate::high_order::hop_param_name).collect();
        let high = HighOrderEncoder::from_params(hc, to_store(&self.high_order.weights, &hop_names, 0)?)?;
        let low_names: Vec<String> = [
            crate::low_order::GCN_WEIGHT,
            crate::low_order::MLP_IN_WEIGHT,
            crate::low_order::MLP_OUT_WEIGHT,
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let low = AffinityEncoder::from_params(
            self.affinity_config(),
            to_store(&self.low_order.weights, &low_names, 0)?,
        )?;
        if high.input_dim() != low.input_dim() {
            return Err(Error::Shape(format!(
                "encoders disagree on input width: {} vs {}",
                high.input_dim(),
                low.input_dim()
            )));
        }
        Ok((high, low))
    }

    /// Latent width both encoders consume.
    pub fn latent_dim(&self) -> Result<usize> {
        Ok(self.encoders()?.0.input_dim())
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        for (name, pool) in [
            ("source_node_scores", &self.source_node_scores),
            ("source_struct_scores", &self.source_struct_scores),
        ] {
            if pool.len() < 2 {
                return Err(Error::Validation(format!("{name} needs at least 2 values")));
            }
            if pool.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("{name} holds non-finite values")));
            }
        }
        if !self.high_order.margin.is_finite() {
            return Err(Error::Validation("high_order.margin is not finite".into()));
        }
        self.encoders()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let artifact: ModelArtifact = serde_json::from_str(text)?;
        artifact.validate()?;
        Ok(artifact)
    }
}

pub fn save_artifact(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    fs::write(path, artifact.to_json()?).map_err(|e| Error::io(path, e))
}

pub fn load_artifact(path: &Path) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelArtifact::from_json(&text)
}
