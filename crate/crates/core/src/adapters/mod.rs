//! Inference-time adapters.
//!
//! [`ada_weights`] turns the two drift distances into fusion weights for the
//! residual and structural channels. The test-time adapter then labels the
//! top-M nodes of each channel, votes, and fits simplex weights over the
//! channels against the voted pseudo-labels.

mod ada;
mod tsa;

pub use ada::{ada_weights, fuse_scores, FusionWeights};
pub use tsa::{
    pseudo_labels_top_m, stack_channels, top_m_count, tsa_fit, tsa_score, vote_labels,
    PseudoLabels, ReliabilityWeights, TsaConfig, TsaFit,
};
