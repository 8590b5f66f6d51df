//! Distribution drift between source and target score channels.
//!
//! Node disassortativity (ND) and structure disassortativity (SD) are
//! Jensen-Shannon distances between source and target score distributions,
//! one per channel. Anomaly disassortativity combines them as
//! `|ND - SD|^(1 + (ND + SD)/2)`.

mod kde;

pub use kde::{
    js_distance, kde_fit, kde_pair, shared_grid, silverman_bandwidth, Grid, KdeDensity,
    DENSITY_FLOOR, GRID_POINTS, MIN_BANDWIDTH,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Additive smoothing used by [`ad_star`].
pub const AD_STAR_SMOOTHING: f64 = 0.01;
/// Slack above 1 accepted from numerical JS distances.
const UNIT_SLACK: f64 = 1e-6;

/// A JS distance together with the bandwidths behind it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    pub distance: f64,
    pub h_source: f64,
    pub h_target: f64,
}

fn channel_divergence(source: &[f64], target: &[f64]) -> Result<Divergence> {
    let (p, q) = kde_pair(source, target)?;
    Ok(Divergence {
        distance: js_distance(&p, &q)?,
        h_source: p.bandwidth,
        h_target: q.bandwidth,
    })
}

/// JS distance between normalized residual-score samples.
pub fn node_disassort(source_node_scores: &[f64], target_node_scores: &[f64]) -> Result<Divergence> {
    channel_divergence(source_node_scores, target_node_scores)
}

/// JS distance between structure-channel samples (`1 - normalized affinity`).
pub fn struct_disassort(source_struct_scores: &[f64], target_struct_scores: &[f64]) -> Result<Divergence> {
    channel_divergence(source_struct_scores, target_struct_scores)
}

fn check_unit(name: &str, v: f64) -> Result<f64> {
    if !(v.is_finite() && (0.0..=1.0 + UNIT_SLACK).contains(&v)) {
        return Err(Error::Validation(format!("{name} = {v} is outside [0, 1]")));
    }
    Ok(v.min(1.0))
}

/// `|nd - sd|^(1 + (nd + sd)/2)`, with `0^e = 0`.
pub fn anomaly_disassort(nd: f64, sd: f64) -> Result<f64> {
    let nd = check_unit("nd", nd)?;
    let sd = check_unit("sd", sd)?;
    let base = (nd - sd).abs();
    if base == 0.0 {
        return Ok(0.0);
    }
    Ok(base.powf(1.0 + 0.5 * (nd + sd)))
}

/// Smoothed min-max normalization: `(ad - min + d) / (max - min + 2d)`.
/// When every value is equal the result is 0.5 throughout.
pub fn ad_star(ads: &[(String, f64)]) -> Result<Vec<(String, f64)>> {
    if ads.len() < 2 {
        return Err(Error::Validation("normalization needs at least 2 domains".into()));
    }
    if ads.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
        return Err(Error::Validation("AD values must be finite and non-negative".into()));
    }
    let min = ads.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
    let max = ads.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
    let d = AD_STAR_SMOOTHING;
    Ok(ads
        .iter()
        .map(|(name, v)| {
            let star = if max == min { 0.5 } else { (v - min + d) / (max - min + 2.0 * d) };
            (name.clone(), star)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisassortReport {
    pub nd: f64,
    pub sd: f64,
    pub ad: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ad_star: Option<f64>,
    pub h_node_source: f64,
    pub h_node_target: f64,
    pub h_struct_source: f64,
    pub h_struct_target: f64,
    pub n_source: usize,
    pub n_target: usize,
}

/// ND, SD and AD for one target against the pooled source samples.
pub fn disassort_report(
    source_node: &[f64],
    source_struct: &[f64],
    target_node: &[f64],
    target_struct: &[f64],
) -> Result<DisassortReport> {
    let node = node_disassort(source_node, target_node)?;
    let strc = struct_disassort(source_struct, target_struct)?;
    let nd = node.distance.min(1.0);
    let sd = strc.distance.min(1.0);
    Ok(DisassortReport {
        nd,
        sd,
        ad: anomaly_disassort(nd, sd)?,
        ad_star: None,
        h_node_source: node.h_source,
        h_node_target: node.h_target,
        h_struct_source: strc.h_source,
        h_struct_target: strc.h_target,
        n_source: source_node.len(),
        n_target: target_node.len(),
    })
}
