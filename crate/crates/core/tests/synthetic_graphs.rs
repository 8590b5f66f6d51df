//! Statistical checks on the synthetic domain generator and anomaly injectors.

use ggad::graph::synth::{
    generate_synthetic_domain, inject_attribute_anomalies, inject_structural_anomalies, DomainShift,
    SyntheticDomainSpec,
};
use ggad::graph::{load_graph, save_graph, Graph};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn spec(p_in: f64, p_out: f64, seed: u64) -> SyntheticDomainSpec {
    SyntheticDomainSpec {
        num_nodes: 400,
        num_blocks: 4,
        intra_block_edge_prob: p_in,
        inter_block_edge_prob: p_out,
        feature_dim: 8,
        feature_domain_shift: DomainShift::default(),
        anomaly_ratio: 0.05,
        seed,
    }
}

/// Pearson chi-square test of independence on a rows x cols table.
fn independence_p_value(table: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    let mut stat = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &obs) in r.iter().enumerate() {
            let exp = rows[i] * cols[j] / total;
            stat += (obs - exp).powi(2) / exp;
        }
    }
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn uniform_edge_probability_gives_block_independent_degrees() {
    // pooled over 20 seeds, degree bins are independent of block membership
    let bins = [0usize, 6, 8, 10, 12, usize::MAX];
    let mut table = vec![vec![0.0; bins.len() - 1]; 4];
    for seed in 0..20 {
        let s = spec(0.025, 0.025, seed);
        let g = generate_synthetic_domain(&s, "flat").unwrap();
        for i in 0..g.num_nodes() {
            let d = g.degree(i);
            let bin = bins.windows(2).position(|w| d >= w[0] && d < w[1]).unwrap();
            table[s.block_of(i)][bin] += 1.0;
        }
    }
    assert!(table.iter().flatten().all(|&c| c >= 20.0), "{table:?}");
    let p = independence_p_value(&table);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn block_structure_shows_up_in_edge_counts() {
    let s = spec(0.08, 0.002, 3);
    let g = generate_synthetic_domain(&s, "blocks").unwrap();
    let labels = g.labels().unwrap();
    let (mut intra, mut inter) = (0, 0);
    for (i, j) in g.edges() {
        if labels[i] == 1 || labels[j] == 1 {
            continue;
        }
        if s.block_of(i) == s.block_of(j) {
            intra += 1;
        } else {
            inter += 1;
        }
    }
    assert!(intra > 10 * inter, "{intra} vs {inter}");
}

fn gaussian_graph(n: usize, d: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, d), |_| rng.sample::<f64, _>(StandardNormal));
    let edges: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    Graph::from_edges("base", x, &edges, Some(vec![0; n])).unwrap().0
}

fn row_distance(a: &Array2<f64>, b: &Array2<f64>, i: usize) -> f64 {
    a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn attribute_anomalies_move_further_than_random_swaps() {
    let n = 300;
    let (mut injected_total, mut baseline_total) = (0.0, 0.0);
    for seed in 0..20u64 {
        let g = gaussian_graph(n, 10, seed);
        let out = inject_attribute_anomalies(&g, 15, 50, seed).unwrap();
        let labels = out.labels().unwrap();
        let targets: Vec<usize> = (0..n).filter(|&i| labels[i] == 1).collect();
        assert_eq!(targets.len(), 15);
        let injected = targets
            .iter()
            .map(|&i| row_distance(out.features(), g.features(), i))
            .sum::<f64>()
            / 15.0;

        // baseline: copy the row of one random other node
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let baseline = targets
            .iter()
            .map(|&i| {
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                g.features().row(i).iter().zip(g.features().row(j)).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
            })
            .sum::<f64>()
            / 15.0;
        injected_total += injected;
        baseline_total += baseline;
    }
    assert!(injected_total > baseline_total, "{injected_total} vs {baseline_total}");
}

#[test]
fn cliques_are_complete_and_labeled() {
    let g = gaussian_graph(100, 4, 5);
    let out = inject_structural_anomalies(&g, 3, 6, 8).unwrap();
    let labels = out.labels().unwrap();
    let members: Vec<usize> = (0..100).filter(|&i| labels[i] == 1).collect();
    assert_eq!(members.len(), 18);
    // each member sits in a 6-clique, so it has at least 5 member neighbors
    for &i in &members {
        let inside = members.iter().filter(|&&j| out.has_edge(i, j)).count();
        assert!(inside >= 5);
    }
    let already: usize = members
        .iter()
        .enumerate()
        .map(|(a, &i)| members[a + 1..].iter().filter(|&&j| g.has_edge(i, j)).count())
        .sum();
    assert!(out.num_edges() <= g.num_edges() + 45);
    assert!(out.num_edges() + already >= g.num_edges() + 45);
}

#[test]
fn generated_domains_survive_a_disk_round_trip() {
    let g = generate_synthetic_domain(&spec(0.05, 0.005, 9), "disk").unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_graph(&g, dir.path()).unwrap();
    let (back, report) = load_graph(dir.path()).unwrap();
    assert_eq!(report.self_loops_dropped, 0);
    assert_eq!(back.num_edges(), g.num_edges());
    assert_eq!(back.labels(), g.labels());
    assert_eq!(back.features(), g.features());
    assert_eq!(back.row_offsets(), g.row_offsets());
    assert_eq!(back.col_indices(), g.col_indices());
}
