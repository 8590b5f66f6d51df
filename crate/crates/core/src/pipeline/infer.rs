use serde::{Deserialize, Serialize};

use super::train::{channel_scores, ChannelScores, PreparedGraph, STREAM_PROJECTION, STREAM_SCORING};
use super::ModelArtifact;
use crate::adapters::{
    ada_weights, fuse_scores, stack_channels, tsa_fit, tsa_score, FusionWeights, PseudoLabels,
    ReliabilityWeights, TsaConfig,
};
use crate::disassort::{disassort_report, DisassortReport};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scores::ScoreVector;
use crate::seed::derive_seed;

const STREAM_TSA: u64 = 7;

/// Channels voted on by the full adapter: residual, structural, fused.
pub const NUM_CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferConfig {
    /// Fraction of nodes pseudo-labeled per channel.
    pub anomaly_ratio: f64,
    /// Minimum channel votes for a pseudo-positive.
    pub k_vote: usize,
    /// Fusion sharpness.
    pub tau: f64,
    pub eps_stab: f64,
    pub tsa_steps: usize,
    pub tsa_learning_rate: f64,
    pub n_k: usize,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        let tsa = TsaConfig::default();
        InferConfig {
            anomaly_ratio: 0.05,
            k_vote: 1,
            tau: 1.0,
            eps_stab: 1e-6,
            tsa_steps: tsa.steps,
            tsa_learning_rate: tsa.learning_rate,
            n_k: 256,
            seed: 0,
        }
    }
}

impl InferConfig {
    pub fn tsa(&self) -> TsaConfig {
        TsaConfig {
            steps: self.tsa_steps,
            learning_rate: self.tsa_learning_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.anomaly_ratio > 0.0 && self.anomaly_ratio < 1.0) {
            return Err(Error::Validation(format!(
                "anomaly_ratio {} must lie in (0, 1)",
                self.anomaly_ratio
            )));
        }
        if self.k_vote == 0 || self.k_vote > NUM_CHANNELS {
            return Err(Error::Validation(format!(
                "k_vote must lie in [1, {NUM_CHANNELS}], got {}",
                self.k_vote
            )));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) || !(self.eps_stab.is_finite() && self.eps_stab >= 0.0) {
            return Err(Error::Validation("tau and eps_stab must be finite and non-negative".into()));
        }
        if !(self.tsa_learning_rate.is_finite() && self.tsa_learning_rate > 0.0) {
            return Err(Error::Validation("tsa_learning_rate must be positive".into()));
        }
        if self.n_k == 0 {
            return Err(Error::Validation("n_k must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferReport {
    pub disassort: DisassortReport,
    pub fusion: FusionWeights,
    pub reliability: ReliabilityWeights,
    /// Pseudo-labels held one class; reliability weights stayed uniform.
    pub tsa_single_class: bool,
    pub m: usize,
    pub k_vote: usize,
    pub channel_positives: Vec<usize>,
    pub voted_positives: usize,
    pub isolated_nodes: usize,
    pub zero_norm_rows: usize,
    pub config: InferConfig,
}

#[derive(Debug, Clone)]
pub struct InferOutput {
    pub channels: ChannelScores,
    /// Drift-weighted fusion of the two base channels.
    pub s_ad: ScoreVector,
    pub pseudo_labels: PseudoLabels,
    pub final_scores: ScoreVector,
    pub report: InferReport,
}

/// Scores an unlabeled target with a frozen artifact.
///
/// Target labels, if present, are dropped before anything else runs.
pub fn infer(artifact: &ModelArtifact, target: &Graph, icfg: &InferConfig) -> Result<InferOutput> {
    icfg.validate()?;
    let n = target.num_nodes();
    if n < 3 {
        return Err(Error::Validation(format!("targets need at least 3 nodes, got {n}")));
    }
    let (high, low) = artifact.encoders()?;
    let prepared = PreparedGraph::new(
        target.without_labels(),
        high.input_dim(),
        derive_seed(icfg.seed, STREAM_PROJECTION),
    )?;
    let channels = channel_scores(&high, &low, &prepared, icfg.n_k, derive_seed(icfg.seed, STREAM_SCORING))?;

    let disassort = disassort_report(
        &artifact.source_node_scores,
        &artifact.source_struct_scores,
        channels.rs.values(),
        channels.structural.values(),
    )?;
    let fusion = ada_weights(disassort.nd, disassort.sd, icfg.tau, icfg.eps_stab)?;
    let s_ad = fuse_scores(&channels.rs, &channels.as_, &fusion)?;

    let voting = [&channels.rs, &channels.structural, &s_ad];
    let pseudo_labels = PseudoLabels::build(&voting, icfg.anomaly_ratio, icfg.k_vote)?;
    let matrix = stack_channels(&voting)?;
    let fit = tsa_fit(matrix.view(), &pseudo_labels.voted, &icfg.tsa(), derive_seed(icfg.seed, STREAM_TSA))?;
    let final_scores = tsa_score(matrix.view(), &fit.weights)?;

    let report = InferReport {
        disassort,
        fusion,
        reliability: fit.weights,
        tsa_single_class: fit.single_class,
        m: pseudo_labels.m,
        k_vote: icfg.k_vote,
        channel_positives: pseudo_labels
            .channels
            .iter()
            .map(|c| c.iter().filter(|&&v| v != 0).count())
            .collect(),
        voted_positives: pseudo_labels.num_positive(),
        isolated_nodes: channels.isolated,
        zero_norm_rows: channels.zero_norm_rows,
        config: *icfg,
    };
    Ok(InferOutput {
        channels,
        s_ad,
        pseudo_labels,
        final_scores,
        report,
    })
}

pub const SCORES_CSV_HEADER: &str = "node_id,rs,as,s_ad,final";

/// One row per node: normalized residual and affinity channels, the fused
/// score and the final score. Values print in shortest round-trip form.
pub fn scores_to_csv(out: &InferOutput) -> String {
    let ch = &out.channels;
    let mut s = String::with_capacity(32 * (ch.rs.len() + 1));
    s.push_str(SCORES_CSV_HEADER);
    s.push('\n');
    for i in 0..ch.rs.len() {
        s.push_str(&format!(
            "{i},{},{},{},{}\n",
            ch.rs.values()[i],
            ch.as_.values()[i],
            out.s_ad.values()[i],
            out.final_scores.values()[i]
        ));
    }
    s
}
