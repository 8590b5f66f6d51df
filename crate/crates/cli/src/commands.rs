use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use ggad::eval::{results_to_csv, run_ablation, summarize, sweep_k as run_sweep_k, auprc, auroc, Variant};
use ggad::graph::synth::{
    generate_synthetic_domain, inject_attribute_anomalies, inject_structural_anomalies, SyntheticDomainSpec,
};
use ggad::graph::{load_graph, load_labels, save_graph, Graph, LABELS_FILE};
use ggad::pipeline::{
    infer as run_infer, load_artifact, save_artifact, scores_to_csv, train as run_train, InferConfig,
    InferReport, TrainConfig,
};
use ggad::seed::derive_seed;
use ggad::ScoreVector;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::{AblateArgs, EvalArgs, InferArgs, InferOverrides, InjectArgs, MetricsArgs, SweepKArgs, SynthArgs, TrainArgs};

pub fn train_defaults_help() -> String {
    defaults_help(&TrainConfig::default())
}

pub fn infer_defaults_help() -> String {
    defaults_help(&InferConfig::default())
}

fn defaults_help<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string_pretty(value).expect("defaults serialize");
    format!("Config file keys and their defaults (flags override the file):\n{json}")
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, &text)
}

fn load(dir: &Path) -> Result<Graph> {
    let (g, _) = load_graph(dir).with_context(|| format!("loading graph {}", dir.display()))?;
    Ok(g)
}

fn infer_config(o: &InferOverrides) -> Result<InferConfig> {
    let mut cfg: InferConfig = match &o.config {
        Some(p) => read_json(p)?,
        None => InferConfig::default(),
    };
    if let Some(r) = o.anomaly_ratio {
        cfg.anomaly_ratio = r;
    }
    if let Some(k) = o.k_vote {
        cfg.k_vote = k;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(e) = a.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(lr) = a.learning_rate {
        cfg.optimizer.learning_rate = lr;
    }
    cfg.validate()?;

    let mut sources = Vec::with_capacity(a.sources.len());
    for dir in &a.sources {
        let labels = dir.join(LABELS_FILE);
        if !labels.exists() {
            bail!("source {} has no labels: {} is missing", dir.display(), labels.display());
        }
        sources.push(load(dir)?);
    }
    if cfg.epochs == 0 {
        log::warn!("epochs = 0: the artifact holds untrained encoders");
    }

    let out = run_train(&sources, &cfg)?;
    for e in &out.history {
        println!("epoch {:>4}  L {:.6}  L_high {:.6}  L_low {:.6}", e.epoch, e.total, e.high, e.low);
    }
    save_artifact(&out.artifact, &a.out)?;
    if let Some(p) = &a.history {
        let mut csv = String::from("epoch,loss,loss_high,loss_low\n");
        for e in &out.history {
            csv.push_str(&format!("{},{},{},{}\n", e.epoch, e.total, e.high, e.low));
        }
        write(p, &csv)?;
    }
    log::info!("wrote {}", a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct InferFile<'a> {
    target: &'a str,
    num_nodes: usize,
    artifact: &'a Path,
    #[serde(flatten)]
    report: &'a InferReport,
}

pub fn infer(a: InferArgs) -> Result<()> {
    let cfg = infer_config(&a.settings)?;
    let artifact = load_artifact(&a.artifact)?;
    let target = load(&a.target)?;
    let out = run_infer(&artifact, &target, &cfg)?;
    write(&a.out, &scores_to_csv(&out))?;

    let report_path = a.report.clone().unwrap_or_else(|| a.out.with_extension("report.json"));
    let r = &out.report;
    write_json(
        &report_path,
        &InferFile {
            target: target.name(),
            num_nodes: target.num_nodes(),
            artifact: &a.artifact,
            report: r,
        },
    )?;
    println!(
        "nd={:.4} sd={:.4} ad={:.4} w_nd={:.3} w_sd={:.3} voted_positives={}",
        r.disassort.nd, r.disassort.sd, r.disassort.ad, r.fusion.w_nd, r.fusion.w_sd, r.voted_positives
    );
    Ok(())
}

pub fn metrics(a: MetricsArgs) -> Result<()> {
    let artifact = load_artifact(&a.artifact)?;
    let target = load(&a.target)?;
    let cfg = InferConfig { seed: a.seed, ..Default::default() };
    let out = run_infer(&artifact, &target, &cfg)?;
    let d = &out.report.disassort;
    println!("nd={:.6} sd={:.6} ad={:.6}", d.nd, d.sd, d.ad);
    if let Some(p) = &a.out {
        #[derive(Serialize)]
        struct MetricsFile<'a> {
            target: &'a str,
            seed: u64,
            #[serde(flatten)]
            drift: &'a ggad::disassort::DisassortReport,
        }
        write_json(p, &MetricsFile { target: target.name(), seed: a.seed, drift: d })?;
    }
    Ok(())
}

fn dir_name(p: &Path) -> String {
    p.file_name().map_or_else(|| "graph".to_string(), |s| s.to_string_lossy().into_owned())
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let spec: SyntheticDomainSpec = read_json(&a.spec)?;
    let g = generate_synthetic_domain(&spec, &dir_name(&a.out))?;
    save_graph(&g, &a.out)?;
    write_json(&a.out.join("spec.json"), &spec)?;
    println!("{} nodes, {} edges, {} anomalies", g.num_nodes(), g.num_edges(), g.num_anomalies());
    Ok(())
}

pub fn inject(a: InjectArgs) -> Result<()> {
    let g = load(&a.graph)?;
    let g = inject_structural_anomalies(&g, a.cliques, a.clique_size, derive_seed(a.seed, 1))?;
    let g = inject_attribute_anomalies(&g, a.attributes, a.candidate_pool, derive_seed(a.seed, 2))?;
    let g = g.with_name(dir_name(&a.out));
    save_graph(&g, &a.out)?;
    #[derive(Serialize)]
    struct InjectFile<'a> {
        source: &'a Path,
        cliques: usize,
        clique_size: usize,
        attributes: usize,
        candidate_pool: usize,
        seed: u64,
    }
    write_json(
        &a.out.join("inject.json"),
        &InjectFile {
            source: &a.graph,
            cliques: a.cliques,
            clique_size: a.clique_size,
            attributes: a.attributes,
            candidate_pool: a.candidate_pool,
            seed: a.seed,
        },
    )?;
    println!("{} anomalies of {} nodes", g.num_anomalies(), g.num_nodes());
    Ok(())
}

fn read_score_column(path: &Path, column: &str) -> Result<Vec<f64>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let Some(idx) = headers.iter().position(|h| h == column) else {
        bail!("{} has no column '{column}' (found {:?})", path.display(), headers.iter().collect::<Vec<_>>());
    };
    let mut values = Vec::new();
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: row {}", path.display(), row + 2))?;
        let field = rec.get(idx).unwrap_or("");
        let v: f64 = field
            .trim()
            .parse()
            .with_context(|| format!("{}: row {}: '{field}' is not a number", path.display(), row + 2))?;
        values.push(v);
    }
    Ok(values)
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let scores = read_score_column(&a.scores, &a.column)?;
    let labels = load_labels(&a.labels)?;
    if scores.len() != labels.len() {
        bail!(
            "{} has {} rows but {} has {}",
            a.scores.display(),
            scores.len(),
            a.labels.display(),
            labels.len()
        );
    }
    let s = ScoreVector::raw(scores);
    println!("auroc={:?}", auroc(&s, &labels)?);
    println!("auprc={:?}", auprc(&s, &labels)?);
    Ok(())
}

fn load_targets(dirs: &[PathBuf]) -> Result<Vec<Graph>> {
    dirs.iter().map(|d| load(d)).collect()
}

/// How each ablation variant is assembled, echoed into the summary.
const VARIANT_WIRING: [(&str, &str); 4] = [
    ("full", "fused score plus the test-time adapter over rs, 1-as and the fused score"),
    ("no_ada_tsa", "unweighted mean of normalized rs and 1-as"),
    ("ada_only", "drift-weighted fusion of rs and 1-as"),
    ("tsa_only", "test-time adapter over rs and 1-as, two votes required"),
];

pub fn ablate(a: AblateArgs) -> Result<()> {
    let cfg = infer_config(&a.settings)?;
    let variants: Vec<Variant> = a.variants.iter().map(|v| v.parse()).collect::<ggad::Result<_>>()?;
    let artifact = load_artifact(&a.artifact)?;
    let targets = load_targets(&a.targets)?;
    let results = run_ablation(&artifact, &targets, &variants, &a.seeds, &cfg)?;
    write(&a.out, &results_to_csv(&results))?;

    let summary = summarize(&results);
    for s in summary.iter().filter(|s| s.dataset.is_none()) {
        println!(
            "{:<11} auroc {:.4} ± {:.4}  auprc {:.4} ± {:.4}",
            s.variant.name(),
            s.auroc_mean,
            s.auroc_std,
            s.auprc_mean,
            s.auprc_std
        );
    }
    if let Some(p) = &a.summary {
        #[derive(Serialize)]
        struct SummaryFile<'a> {
            config: &'a InferConfig,
            seeds: &'a [u64],
            wiring: Vec<(&'static str, &'static str)>,
            summary: &'a [ggad::eval::MetricSummary],
        }
        let wiring = VARIANT_WIRING
            .into_iter()
            .filter(|(name, _)| variants.iter().any(|v| v.name() == *name))
            .collect();
        write_json(p, &SummaryFile { config: &cfg, seeds: &a.seeds, wiring, summary: &summary })?;
    }
    Ok(())
}

pub fn sweep_k(a: SweepKArgs) -> Result<()> {
    let cfg = infer_config(&a.settings)?;
    let artifact = load_artifact(&a.artifact)?;
    let target = load(&a.target)?;
    let rows = run_sweep_k(&artifact, &target, &a.k_values, &a.seeds, &cfg)?;
    let mut csv = String::from("k_vote,seed,auroc,auprc,voted_positives\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{},{}\n", r.k_vote, r.seed, r.auroc, r.auprc, r.voted_positives));
    }
    write(&a.out, &csv)?;
    for k in &a.k_values {
        let v: Vec<f64> = rows.iter().filter(|r| r.k_vote == *k).map(|r| r.auroc).collect();
        println!("k_vote={k} auroc={:.4}", v.iter().sum::<f64>() / v.len() as f64);
    }
    Ok(())
}
