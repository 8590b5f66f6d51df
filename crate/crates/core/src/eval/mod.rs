//! Ranking metrics, adapter ablations and the synthetic benchmark.

mod ablation;
mod metrics;
mod suite;

pub use ablation::{
    results_to_csv, run_ablation, summarize, sweep_k, variant_scores, ExperimentResult, KSweepRow,
    MetricSummary, Variant, BASE_CHANNEL_K_VOTE, RESULTS_CSV_HEADER,
};
pub use metrics::{auprc, auroc};
pub use suite::SyntheticSuite;
