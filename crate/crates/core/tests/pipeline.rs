//! Training, persistence and zero-shot inference end to end.

use ggad::diff::AdamConfig;
use ggad::eval::{auroc, SyntheticSuite};
use ggad::graph::synth::{generate_synthetic_domain, DomainShift, SyntheticDomainSpec};
use ggad::graph::{symmetric_normalize, Graph};
use ggad::high_order::{train_high_order, HighOrderConfig, HighOrderEncoder, LabeledInput};
use ggad::pipeline::{
    infer, load_artifact, save_artifact, train, InferConfig, ModelArtifact, TrainConfig,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn small_spec(blocks: usize, dim: usize, rotation: f64, seed: u64) -> SyntheticDomainSpec {
    SyntheticDomainSpec {
        num_nodes: 300,
        num_blocks: blocks,
        intra_block_edge_prob: 0.08,
        inter_block_edge_prob: 0.004,
        feature_dim: dim,
        feature_domain_shift: DomainShift { scale: 1.0, rotation },
        anomaly_ratio: 0.05,
        seed,
    }
}

fn small_sources() -> Vec<Graph> {
    vec![
        generate_synthetic_domain(&small_spec(4, 32, 0.0, 1), "src_a").unwrap(),
        generate_synthetic_domain(&small_spec(6, 48, 0.5, 2), "src_b").unwrap(),
    ]
}

fn quick_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        latent_dim: 16,
        hidden_dim: 16,
        affinity_hidden_dim: 16,
        affinity_bottleneck_dim: 8,
        ..Default::default()
    }
}

/// Two dense clusters plus five nodes whose features come from far away.
fn two_clusters(seed: u64) -> (Graph, Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 60;
    let d = 8;
    let mut x = Array2::<f64>::zeros((n, d));
    let mut edges = Vec::new();
    for i in 0..n {
        let c = if i < n / 2 { 2.0 } else { -2.0 };
        for k in 0..d {
            x[[i, k]] = c + 0.3 * rng.sample::<f64, _>(StandardNormal);
        }
        for j in (i + 1)..n {
            let same = (i < n / 2) == (j < n / 2);
            if rng.random::<f64>() < if same { 0.3 } else { 0.01 } {
                edges.push((i, j));
            }
        }
    }
    let anomaly: Vec<usize> = vec![3, 17, 29, 41, 55];
    for &a in &anomaly {
        for k in 0..d {
            x[[a, k]] = 6.0 * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let normal = (0..n).filter(|i| !anomaly.contains(i)).collect();
    let g = Graph::from_edges("clusters", x, &edges, None).unwrap().0;
    (g, normal, anomaly)
}

#[test]
fn contrastive_training_halves_the_loss() {
    for seed in 0..5u64 {
        let (g, normal, anomaly) = two_clusters(seed);
        let adj = symmetric_normalize(&g, true);
        let cfg = HighOrderConfig { num_hops: 4, hidden_dim: 16, margin: 0.1 };
        let enc = HighOrderEncoder::new(cfg, 8, seed).unwrap();
        let input = LabeledInput {
            adj: &adj,
            x: g.features().view(),
            normal_idx: &normal,
            anomaly_idx: &anomaly,
        };
        let (_, history) = train_high_order(enc, &[input], 200, AdamConfig::default(), seed).unwrap();
        let (first, last) = (history[0], *history.last().unwrap());
        assert!(last <= 0.5 * first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn joint_loss_falls_on_every_source() {
    let sources = small_sources();
    for seed in 0..5u64 {
        let out = train(&sources, &quick_config(200, seed)).unwrap();
        let (first, last) = (&out.history[0], out.history.last().unwrap());
        for (g, (a, b)) in first.per_graph.iter().zip(&last.per_graph).enumerate() {
            assert!(b.0 + b.1 < a.0 + a.1, "seed {seed} graph {g}: {a:?} -> {b:?}");
        }
    }
}

#[test]
fn zero_epochs_still_yields_a_usable_artifact() {
    let sources = small_sources();
    let out = train(&sources, &quick_config(0, 0)).unwrap();
    assert!(out.history.is_empty());
    out.artifact.validate().unwrap();
    assert_eq!(out.artifact.source_node_scores.len(), 600);
    let target = generate_synthetic_domain(&small_spec(5, 20, 1.0, 3), "tgt").unwrap();
    let res = infer(&out.artifact, &target, &InferConfig::default()).unwrap();
    assert_eq!(res.final_scores.len(), 300);
}

#[test]
fn unlabeled_or_single_class_sources_are_rejected() {
    let g = small_sources().remove(0);
    let unlabeled = g.without_labels();
    assert!(train(&[unlabeled], &quick_config(1, 0)).is_err());
    let all_normal = g.clone().with_labels(vec![0; 300]).unwrap();
    assert!(train(&[all_normal], &quick_config(1, 0)).is_err());
    assert!(train(&[], &quick_config(1, 0)).is_err());
}

#[test]
fn training_is_deterministic_and_persistence_is_exact() {
    let sources = small_sources();
    let a = train(&sources, &quick_config(20, 3)).unwrap().artifact;
    let b = train(&sources, &quick_config(20, 3)).unwrap().artifact;
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());

    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.json");
    let p2 = dir.path().join("b.json");
    save_artifact(&a, &p1).unwrap();
    let loaded = load_artifact(&p1).unwrap();
    save_artifact(&loaded, &p2).unwrap();
    assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

    let target = generate_synthetic_domain(&small_spec(5, 20, 1.0, 3), "tgt").unwrap();
    let icfg = InferConfig::default();
    let before = infer(&a, &target, &icfg).unwrap();
    let after = infer(&loaded, &target, &icfg).unwrap();
    assert_eq!(before.final_scores, after.final_scores);
    assert_eq!(before.report, after.report);
}

#[test]
fn damaged_artifacts_are_rejected() {
    let a = train(&small_sources(), &quick_config(2, 0)).unwrap().artifact;
    let text = a.to_json().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cut.json");
    std::fs::write(&p, &text[..text.len() / 2]).unwrap();
    assert!(load_artifact(&p).is_err());
    assert!(load_artifact(&dir.path().join("missing.json")).is_err());

    let mut empty: ModelArtifact = a.clone();
    empty.source_node_scores.clear();
    assert!(empty.validate().is_err());
    assert!(ModelArtifact::from_json(&empty.to_json().unwrap()).is_err());

    let mut wrong_version = a.clone();
    wrong_version.format_version += 1;
    assert!(ModelArtifact::from_json(&wrong_version.to_json().unwrap()).is_err());

    let extra = text.replacen('{', "{\n  \"surprise\": 1,", 1);
    assert!(ModelArtifact::from_json(&extra).is_err());
}

#[test]
fn inference_never_reads_target_labels() {
    let a = train(&small_sources(), &quick_config(10, 0)).unwrap().artifact;
    let target = generate_synthetic_domain(&small_spec(5, 20, 1.0, 3), "tgt").unwrap();
    let icfg = InferConfig::default();
    let base = infer(&a, &target, &icfg).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let shuffled: Vec<u8> = (0..300).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
    let variants = [target.without_labels(), target.clone().with_labels(shuffled).unwrap()];
    for t in &variants {
        let out = infer(&a, t, &icfg).unwrap();
        assert_eq!(out.final_scores, base.final_scores);
        assert_eq!(out.report, base.report);
    }
    // same inputs, same outputs
    assert_eq!(infer(&a, &target, &icfg).unwrap().final_scores, base.final_scores);
}

#[test]
fn scoring_a_training_source_shows_no_drift() {
    let source = small_sources().remove(0);
    let cfg = quick_config(50, 0);
    let a = train(std::slice::from_ref(&source), &cfg).unwrap().artifact;
    let out = infer(&a, &source, &InferConfig { seed: cfg.seed, ..Default::default() }).unwrap();
    let r = &out.report.disassort;
    assert!(r.nd <= 0.05 && r.sd <= 0.05, "nd {} sd {}", r.nd, r.sd);
}

#[test]
fn invalid_inference_settings_are_rejected() {
    let a = train(&small_sources(), &quick_config(1, 0)).unwrap().artifact;
    let target = generate_synthetic_domain(&small_spec(5, 20, 1.0, 3), "tgt").unwrap();
    let err = infer(&a, &target, &InferConfig { k_vote: 4, ..Default::default() }).unwrap_err();
    assert!(err.to_string().contains('3'), "{err}");
    assert!(infer(&a, &target, &InferConfig { anomaly_ratio: 0.0, ..Default::default() }).is_err());
    let tiny = Graph::from_edges("tiny", Array2::zeros((2, 3)), &[(0, 1)], None).unwrap().0;
    assert!(infer(&a, &tiny, &InferConfig::default()).is_err());
}

#[test]
fn trained_detector_beats_chance_on_held_out_domains() {
    let (sources, targets) = SyntheticSuite::standard(600, 1).generate().unwrap();
    let mut total = 0.0;
    let mut runs = 0.0;
    for seed in 0..5u64 {
        let cfg = TrainConfig { epochs: 100, seed, ..Default::default() };
        let a = train(&sources, &cfg).unwrap().artifact;
        for t in &targets {
            let out = infer(&a, t, &InferConfig { seed, ..Default::default() }).unwrap();
            total += auroc(&out.final_scores, t.labels().unwrap()).unwrap();
            runs += 1.0;
        }
    }
    assert!(total / runs > 0.5, "mean AUROC {}", total / runs);
}
