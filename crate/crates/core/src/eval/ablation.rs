use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::metrics::{auprc, auroc};
use crate::adapters::{stack_channels, tsa_fit, tsa_score, PseudoLabels};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par;
use crate::pipeline::{infer, InferConfig, InferOutput, ModelArtifact};
use crate::scores::ScoreVector;
use crate::seed::derive_seed;

/// Vote threshold used when the adapter runs over the two base channels only.
pub const BASE_CHANNEL_K_VOTE: usize = 2;

/// Which adapters are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Drift-weighted fusion followed by the test-time adapter.
    Full,
    /// Unweighted mean of the residual and structural channels.
    NoAdaTsa,
    /// Drift-weighted fusion alone.
    AdaOnly,
    /// Test-time adapter over the two base channels, no fusion.
    TsaOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoAdaTsa, Variant::AdaOnly, Variant::TsaOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAdaTsa => "no_ada_tsa",
            Variant::AdaOnly => "ada_only",
            Variant::TsaOnly => "tsa_only",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Validation(format!("unknown variant '{s}'")))
    }
}

/// Final scores of `variant`, derived from one full inference run.
pub fn variant_scores(out: &InferOutput, variant: Variant, icfg: &InferConfig) -> Result<ScoreVector> {
    let ch = &out.channels;
    match variant {
        Variant::Full => Ok(out.final_scores.clone()),
        Variant::AdaOnly => Ok(out.s_ad.clone()),
        Variant::NoAdaTsa => ScoreVector::unit(
            ch.rs
                .values()
                .iter()
                .zip(ch.structural.values())
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
        ),
        Variant::TsaOnly => {
            let base = [&ch.rs, &ch.structural];
            let labels = PseudoLabels::build(&base, icfg.anomaly_ratio, BASE_CHANNEL_K_VOTE)?;
            let m = stack_channels(&base)?;
            let fit = tsa_fit(m.view(), &labels.voted, &icfg.tsa(), derive_seed(icfg.seed, 8))?;
            tsa_score(m.view(), &fit.weights)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub dataset: String,
    pub variant: Variant,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
    pub runtime_ms: f64,
    pub diagnostics: BTreeMap<String, f64>,
}

fn eval_labels(g: &Graph) -> Result<&[u8]> {
    g.labels()
        .ok_or_else(|| Error::Validation(format!("target '{}' has no evaluation labels", g.name())))
}

fn diagnostics(out: &InferOutput) -> BTreeMap<String, f64> {
    let r = &out.report;
    BTreeMap::from([
        ("nd".to_string(), r.disassort.nd),
        ("sd".to_string(), r.disassort.sd),
        ("ad".to_string(), r.disassort.ad),
        ("w_nd".to_string(), r.fusion.w_nd),
        ("voted_positives".to_string(), r.voted_positives as f64),
    ])
}

/// Scores every target once per seed and evaluates each requested variant.
/// Labels are read only by the metric functions.
pub fn run_ablation(
    artifact: &ModelArtifact,
    targets: &[Graph],
    variants: &[Variant],
    seeds: &[u64],
    icfg: &InferConfig,
) -> Result<Vec<ExperimentResult>> {
    if variants.is_empty() {
        return Ok(Vec::new());
    }
    let jobs: Vec<(usize, u64)> = (0..targets.len())
        .flat_map(|t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let nested = par::map_slice(&jobs, |&(t, seed)| -> Result<Vec<ExperimentResult>> {
        let target = &targets[t];
        let cfg = InferConfig { seed, ..*icfg };
        let start = Instant::now();
        let out = infer(artifact, target, &cfg)?;
        let base_ms = start.elapsed().as_secs_f64() * 1e3;
        let labels = eval_labels(target)?;
        let diag = diagnostics(&out);
        variants
            .iter()
            .map(|&variant| {
                let t0 = Instant::now();
                let scores = variant_scores(&out, variant, &cfg)?;
                Ok(ExperimentResult {
                    dataset: target.name().to_string(),
                    variant,
                    seed,
                    auroc: auroc(&scores, labels)?,
                    auprc: auprc(&scores, labels)?,
                    runtime_ms: base_ms + t0.elapsed().as_secs_f64() * 1e3,
                    diagnostics: diag.clone(),
                })
            })
            .collect()
    });
    let mut results = Vec::new();
    for r in nested {
        results.extend(r?);
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSweepRow {
    pub k_vote: usize,
    pub seed: u64,
    pub auroc: f64,
    pub auprc: f64,
    pub voted_positives: usize,
}

/// Full-pipeline metrics for each vote threshold and seed.
pub fn sweep_k(
    artifact: &ModelArtifact,
    target: &Graph,
    k_values: &[usize],
    seeds: &[u64],
    icfg: &InferConfig,
) -> Result<Vec<KSweepRow>> {
    let labels = eval_labels(target)?;
    let jobs: Vec<(usize, u64)> = k_values
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    par::map_slice(&jobs, |&(k_vote, seed)| {
        let out = infer(artifact, target, &InferConfig { k_vote, seed, ..*icfg })?;
        Ok(KSweepRow {
            k_vote,
            seed,
            auroc: auroc(&out.final_scores, labels)?,
            auprc: auprc(&out.final_scores, labels)?,
            voted_positives: out.report.voted_positives,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub variant: Variant,
    /// `None` for the aggregate over every dataset.
    pub dataset: Option<String>,
    pub runs: usize,
    pub auroc_mean: f64,
    pub auroc_std: f64,
    pub auprc_mean: f64,
    pub auprc_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn sorted(mut v: Vec<&ExperimentResult>) -> Vec<&ExperimentResult> {
    v.sort_by(|a, b| (a.dataset.as_str(), a.seed).cmp(&(b.dataset.as_str(), b.seed)));
    v
}

fn summary_of(variant: Variant, dataset: Option<String>, rows: &[&ExperimentResult]) -> MetricSummary {
    let a: Vec<f64> = rows.iter().map(|r| r.auroc).collect();
    let p: Vec<f64> = rows.iter().map(|r| r.auprc).collect();
    let (auroc_mean, auroc_std) = mean_std(&a);
    let (auprc_mean, auprc_std) = mean_std(&p);
    MetricSummary {
        variant,
        dataset,
        runs: rows.len(),
        auroc_mean,
        auroc_std,
        auprc_mean,
        auprc_std,
    }
}

/// Per-variant means and population standard deviations, first over all
/// datasets, then per dataset. Ordering does not depend on input order.
pub fn summarize(results: &[ExperimentResult]) -> Vec<MetricSummary> {
    let mut by_variant: BTreeMap<Variant, Vec<&ExperimentResult>> = BTreeMap::new();
    let mut by_dataset: BTreeMap<(Variant, &str), Vec<&ExperimentResult>> = BTreeMap::new();
    for r in results {
        by_variant.entry(r.variant).or_default().push(r);
        by_dataset.entry((r.variant, r.dataset.as_str())).or_default().push(r);
    }
    let mut out: Vec<MetricSummary> = by_variant
        .into_iter()
        .map(|(v, rows)| summary_of(v, None, &sorted(rows)))
        .collect();
    out.extend(
        by_dataset
            .into_iter()
            .map(|((v, d), rows)| summary_of(v, Some(d.to_string()), &sorted(rows))),
    );
    out
}

pub const RESULTS_CSV_HEADER: &str = "dataset,variant,seed,auroc,auprc,runtime_ms";

pub fn results_to_csv(results: &[ExperimentResult]) -> String {
    let mut s = String::from(RESULTS_CSV_HEADER);
    s.push('\n');
    for r in results {
        s.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            r.dataset, r.variant, r.seed, r.auroc, r.auprc, r.runtime_ms
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(serde_json::to_string(&v).unwrap(), format!("\"{}\"", v.name()));
        }
        assert!("both".parse::<Variant>().is_err());
    }

    #[test]
    fn summary_statistics() {
        let mk = |d: &str, seed, auroc| ExperimentResult {
            dataset: d.into(),
            variant: Variant::Full,
            seed,
            auroc,
            auprc: 0.5,
            runtime_ms: 1.0,
            diagnostics: BTreeMap::new(),
        };
        let rows = vec![mk("a", 0, 0.6), mk("a", 1, 0.8), mk("b", 0, 0.7)];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert!((s[0].auroc_mean - 0.7).abs() < 1e-12);
        assert_eq!(s[0].dataset, None);
        assert_eq!(s[1].dataset.as_deref(), Some("a"));
        assert!((s[1].auroc_std - 0.1).abs() < 1e-12);
    }

    #[test]
    fn csv_has_fixed_header() {
        let csv = results_to_csv(&[]);
        assert_eq!(csv, "dataset,variant,seed,auroc,auprc,runtime_ms\n");
    }
}
