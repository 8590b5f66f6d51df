//! Naive reference implementations shared by the integration tests.
#![allow(dead_code)]

use ggad::graph::Graph;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

/// Erdos-Renyi graph with Gaussian features.
pub fn random_graph(n: usize, d: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(n, d, &mut rng);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Graph::from_edges(format!("r{seed}"), x, &edges, None).unwrap().0
}

/// Mean squared distance from every row to every row, self included.
pub fn exhaustive_residual_score(r: &Array2<f64>) -> Vec<f64> {
    let n = r.nrows();
    (0..n)
        .map(|i| {
            let mut total = 0.0;
            for j in 0..n {
                for c in 0..r.ncols() {
                    let d = r[[i, c]] - r[[j, c]];
                    total += d * d;
                }
            }
            total / n as f64
        })
        .collect()
}

/// Neighbor-average cosine in both embeddings, looping over all node pairs.
/// Isolated nodes take the mean of the others.
pub fn direct_affinity(h_bar: &Array2<f64>, h_hat: &Array2<f64>, g: &Graph) -> Vec<f64> {
    fn cos(h: &Array2<f64>, i: usize, j: usize) -> f64 {
        let (a, b) = (h.row(i), h.row(j));
        let (na, nb) = (a.dot(&a).sqrt(), b.dot(&b).sqrt());
        if na <= 1e-12 || nb <= 1e-12 {
            0.0
        } else {
            a.dot(&b) / (na * nb)
        }
    }
    let n = g.num_nodes();
    let mut out = vec![f64::NAN; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut sum = 0.0;
        let mut deg = 0;
        for j in 0..n {
            if j != i && g.has_edge(i, j) {
                sum += cos(h_bar, i, j) + cos(h_hat, i, j);
                deg += 1;
            }
        }
        if deg > 0 {
            *slot = sum / deg as f64;
        }
    }
    let defined: Vec<f64> = out.iter().copied().filter(|v| !v.is_nan()).collect();
    let fill = defined.iter().sum::<f64>() / defined.len() as f64;
    out.into_iter().map(|v| if v.is_nan() { fill } else { v }).collect()
}

/// P(s+ > s-) + P(s+ = s-)/2 over every positive/negative pair.
pub fn pairwise_auroc(s: &[f64], y: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                pairs += 1.0;
                if s[i] > s[j] {
                    wins += 1.0;
                } else if s[i] == s[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Random scores on a coarse lattice (so ties are common) with both classes.
pub fn random_ranking_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<u8>) {
    let n = rng.random_range(2..=200);
    let levels = rng.random_range(1..=20) as f64;
    let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.3)).collect();
    y[0] = 1;
    y[1] = 0;
    let s = (0..n).map(|_| (rng.random::<f64>() * levels).floor() / levels).collect();
    (s, y)
}
