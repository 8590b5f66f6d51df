use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::synth::{generate_synthetic_domain, DomainShift, SyntheticDomainSpec};
use crate::graph::Graph;
use crate::par;
use crate::seed::derive_seed;

/// Named synthetic domains split into labeled sources and held-out targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSuite {
    pub sources: Vec<(String, SyntheticDomainSpec)>,
    pub targets: Vec<(String, SyntheticDomainSpec)>,
}

#[allow(clippy::too_many_arguments)]
fn domain(
    num_nodes: usize,
    num_blocks: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    scale: f64,
    rotation: f64,
    seed: u64,
) -> SyntheticDomainSpec {
    SyntheticDomainSpec {
        num_nodes,
        num_blocks,
        intra_block_edge_prob: p_in,
        inter_block_edge_prob: p_out,
        feature_dim,
        feature_domain_shift: DomainShift { scale, rotation },
        anomaly_ratio: 0.05,
        seed,
    }
}

impl SyntheticSuite {
    /// Two sources and four targets of `num_nodes` nodes each. Every domain
    /// differs in block structure, edge density, feature width, scale and
    /// rotation.
    pub fn standard(num_nodes: usize, seed: u64) -> Self {
        let s = |k| derive_seed(seed, k);
        let n = num_nodes;
        SyntheticSuite {
            sources: vec![
                ("source_blocks5".into(), domain(n, 5, 0.040, 0.0020, 32, 1.0, 0.0, s(1))),
                ("source_blocks8".into(), domain(n, 8, 0.060, 0.0010, 48, 2.0, 0.3, s(2))),
            ],
            targets: vec![
                ("target_dense".into(), domain(n, 4, 0.080, 0.0030, 24, 0.5, 0.7, s(3))),
                ("target_sparse".into(), domain(n, 10, 0.030, 0.0005, 64, 3.0, 1.1, s(4))),
                ("target_wide".into(), domain(n, 6, 0.050, 0.0020, 100, 1.5, -0.4, s(5))),
                ("target_mixed".into(), domain(n, 3, 0.030, 0.0060, 40, 0.8, 2.0, s(6))),
            ],
        }
    }

    /// Generates `(sources, targets)`.
    pub fn generate(&self) -> Result<(Vec<Graph>, Vec<Graph>)> {
        let build = |list: &[(String, SyntheticDomainSpec)]| -> Result<Vec<Graph>> {
            par::map_slice(list, |(name, spec)| generate_synthetic_domain(spec, name))
                .into_iter()
                .collect()
        };
        Ok((build(&self.sources)?, build(&self.targets)?))
    }
}
