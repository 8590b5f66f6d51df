use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diff::{Adam, AdamConfig, ParamStore};
use crate::error::{Error, Result};
use crate::scores::ScoreVector;

const LOGITS: &str = "logits";
/// Combined scores are clamped here before the cross-entropy.
const PROB_CLAMP: f64 = 1e-6;
/// Logits start uniformly within this distance of zero.
const INIT_SPREAD: f64 = 0.01;

/// `M = ceil(ratio * N)`, at least 1 and at most N.
pub fn top_m_count(n: usize, anomaly_ratio: f64) -> Result<usize> {
    if !(anomaly_ratio > 0.0 && anomaly_ratio < 1.0) {
        return Err(Error::Validation(format!(
            "anomaly ratio {anomaly_ratio} must lie in (0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::Validation("cannot label an empty score vector".into()));
    }
    // the small offset keeps 0.05 * 1000 from rounding up to 51
    let m = (anomaly_ratio * n as f64 - 1e-9).ceil() as usize;
    Ok(m.clamp(1, n))
}

/// Labels the `M` highest scores 1; ties at the cutoff go to lower indices.
pub fn pseudo_labels_top_m(scores: &ScoreVector, anomaly_ratio: f64) -> Result<Vec<u8>> {
    let v = scores.values();
    let m = top_m_count(v.len(), anomaly_ratio)?;
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut labels = vec![0u8; v.len()];
    for &i in &order[..m] {
        labels[i] = 1;
    }
    Ok(labels)
}

/// A node is positive when at least `k_vote` channels label it.
pub fn vote_labels(channel_labels: &[Vec<u8>], k_vote: usize) -> Result<Vec<u8>> {
    let first = channel_labels
        .first()
        .ok_or_else(|| Error::Validation("no channels to vote over".into()))?;
    if k_vote == 0 || k_vote > channel_labels.len() {
        return Err(Error::Validation(format!(
            "k_vote must lie in [1, {}], got {k_vote}",
            channel_labels.len()
        )));
    }
    if channel_labels.iter().any(|c| c.len() != first.len()) {
        return Err(Error::Shape("channel label vectors differ in length".into()));
    }
    Ok((0..first.len())
        .map(|i| {
            let votes: usize = channel_labels.iter().map(|c| (c[i] != 0) as usize).sum();
            (votes >= k_vote) as u8
        })
        .collect())
}

/// Per-channel top-M labels and their vote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabels {
    pub channels: Vec<Vec<u8>>,
    pub voted: Vec<u8>,
    pub m: usize,
    pub k_vote: usize,
}

impl PseudoLabels {
    pub fn build(channels: &[&ScoreVector], anomaly_ratio: f64, k_vote: usize) -> Result<Self> {
        let labels = channels
            .iter()
            .map(|c| pseudo_labels_top_m(c, anomaly_ratio))
            .collect::<Result<Vec<_>>>()?;
        let voted = vote_labels(&labels, k_vote)?;
        let n = channels.first().map_or(0, |c| c.len());
        Ok(PseudoLabels {
            m: top_m_count(n, anomaly_ratio)?,
            channels: labels,
            voted,
            k_vote,
        })
    }

    pub fn num_positive(&self) -> usize {
        self.voted.iter().filter(|&&v| v != 0).count()
    }
}

/// Softmax-parametrized channel weights on the simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityWeights {
    pub logits: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ReliabilityWeights {
    pub fn from_logits(logits: Vec<f64>) -> Self {
        let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = exp.iter().sum();
        ReliabilityWeights {
            weights: exp.iter().map(|e| e / total).collect(),
            logits,
        }
    }

    pub fn uniform(k: usize) -> Self {
        Self::from_logits(vec![0.0; k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsaConfig {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for TsaConfig {
    fn default() -> Self {
        TsaConfig {
            steps: 200,
            learning_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsaFit {
    pub weights: ReliabilityWeights,
    /// Voted labels held one class only; weights were left uniform.
    pub single_class: bool,
    pub final_loss: Option<f64>,
}

fn check_channels(scores: ArrayView2<'_, f64>) -> Result<()> {
    if scores.ncols() == 0 || scores.nrows() == 0 {
        return Err(Error::Shape("channel matrix is empty".into()));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("channel scores must be finite".into()));
    }
    Ok(())
}

/// Mean binary cross-entropy of the weighted combination, with its gradient
/// w.r.t. the logits.
fn bce_and_grad(scores: ArrayView2<'_, f64>, labels: &[u8], w: &ReliabilityWeights) -> (f64, Vec<f64>) {
    let n = scores.nrows() as f64;
    let k = scores.ncols();
    let mut loss = 0.0;
    let mut dw = vec![0.0; k];
    for (row, &y) in scores.rows().into_iter().zip(labels) {
        let s: f64 = row.iter().zip(&w.weights).map(|(a, b)| a * b).sum();
        let c = s.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let y = f64::from(y);
        loss -= y * c.ln() + (1.0 - y) * (1.0 - c).ln();
        if c == s {
            let ds = (c - y) / (c * (1.0 - c));
            for (d, a) in dw.iter_mut().zip(row) {
                *d += ds * a;
            }
        }
    }
    // softmax Jacobian: dL/dz_j = w_j (g_j - sum_k w_k g_k)
    let avg: f64 = dw.iter().zip(&w.weights).map(|(g, p)| g * p).sum();
    let dz = dw
        .iter()
        .zip(&w.weights)
        .map(|(g, p)| p * (g - avg) / n)
        .collect();
    (loss / n, dz)
}

/// Fits simplex weights so the combined score predicts the voted labels.
pub fn tsa_fit(scores: ArrayView2<'_, f64>, voted: &[u8], cfg: &TsaConfig, seed: u64) -> Result<TsaFit> {
    check_channels(scores)?;
    if voted.len() != scores.nrows() {
        return Err(Error::Shape(format!(
            "{} labels for {} nodes",
            voted.len(),
            scores.nrows()
        )));
    }
    let k = scores.ncols();
    let positives = voted.iter().filter(|&&v| v != 0).count();
    if positives == 0 || positives == voted.len() {
        log::warn!("pseudo-labels hold a single class; reliability weights stay uniform");
        return Ok(TsaFit {
            weights: ReliabilityWeights::uniform(k),
            single_class: true,
            final_loss: None,
        });
    }
    if k == 1 {
        let w = ReliabilityWeights::uniform(1);
        let (loss, _) = bce_and_grad(scores, voted, &w);
        return Ok(TsaFit {
            weights: w,
            single_class: false,
            final_loss: Some(loss),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Array2::from_shape_fn((1, k), |_| rng.random_range(-INIT_SPREAD..=INIT_SPREAD));
    let mut params = ParamStore::empty(seed);
    params.insert(LOGITS, init)?;
    let mut adam = Adam::new(
        AdamConfig {
            learning_rate: cfg.learning_rate,
            ..AdamConfig::default()
        },
        &params,
    );
    for _ in 0..cfg.steps {
        let w = ReliabilityWeights::from_logits(params.value(LOGITS)?.iter().copied().collect());
        let (loss, dz) = bce_and_grad(scores, voted, &w);
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("adapter loss is {loss}")));
        }
        let grad = &mut params.get_mut(LOGITS)?.grad;
        for (g, d) in grad.iter_mut().zip(dz) {
            *g = d;
        }
        adam.step(&mut params)?;
    }
    let weights = ReliabilityWeights::from_logits(params.value(LOGITS)?.iter().copied().collect());
    let (loss, _) = bce_and_grad(scores, voted, &weights);
    Ok(TsaFit {
        weights,
        single_class: false,
        final_loss: Some(loss),
    })
}

/// `S(v_i) = sum_k w_k s_ik`.
pub fn tsa_score(scores: ArrayView2<'_, f64>, w: &ReliabilityWeights) -> Result<ScoreVector> {
    check_channels(scores)?;
    if scores.ncols() != w.weights.len() {
        return Err(Error::Shape(format!(
            "{} channels but {} weights",
            scores.ncols(),
            w.weights.len()
        )));
    }
    let out = scores
        .rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(&w.weights)
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect();
    ScoreVector::unit(out)
}

/// Stacks normalized channels column-wise into an `N x K` matrix.
pub fn stack_channels(channels: &[&ScoreVector]) -> Result<Array2<f64>> {
    let n = channels
        .first()
        .ok_or_else(|| Error::Validation("no channels to stack".into()))?
        .len();
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::Shape("channels differ in length".into()));
    }
    Ok(Array2::from_shape_fn((n, channels.len()), |(i, k)| channels[k].values()[i]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::unit(v.to_vec()).unwrap()
    }

    #[test]
    fn direct_top_m() {
        assert_eq!(pseudo_labels_top_m(&sv(&[0.9, 0.1, 0.5]), 0.34).unwrap(), vec![1, 0, 1]);
    }

    #[test]
    fn ties_favor_low_index() {
        assert_eq!(pseudo_labels_top_m(&sv(&[0.5; 4]), 0.25).unwrap(), vec![1, 0, 0, 0]);
    }

    #[test]
    fn five_percent_of_thousand_is_fifty() {
        assert_eq!(top_m_count(1000, 0.05).unwrap(), 50);
        assert_eq!(top_m_count(3, 0.34).unwrap(), 2);
        assert!(top_m_count(10, 0.0).is_err());
        assert!(top_m_count(10, 1.0).is_err());
    }

    #[test]
    fn voting_rules() {
        let ch = vec![vec![1, 0], vec![0, 0], vec![0, 1]];
        assert_eq!(vote_labels(&ch, 1).unwrap(), vec![1, 1]);
        let ch = vec![vec![1, 0], vec![1, 1], vec![0, 1]];
        assert_eq!(vote_labels(&ch, 2).unwrap(), vec![1, 1]);
        assert_eq!(vote_labels(&ch, 3).unwrap(), vec![0, 0]);
        assert!(vote_labels(&ch, 4).is_err());
        assert!(vote_labels(&[], 1).is_err());
    }

    #[test]
    fn single_channel_has_unit_weight() {
        let s = array![[0.1], [0.9], [0.4]];
        let fit = tsa_fit(s.view(), &[0, 1, 0], &TsaConfig::default(), 0).unwrap();
        assert_eq!(fit.weights.weights, vec![1.0]);
    }

    #[test]
    fn single_class_is_flagged() {
        let s = array![[0.1, 0.2], [0.9, 0.3]];
        let fit = tsa_fit(s.view(), &[0, 0], &TsaConfig::default(), 0).unwrap();
        assert!(fit.single_class);
        assert_eq!(fit.weights.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn uniform_weights_average() {
        let s = array![[0.2, 0.4, 0.6]];
        let out = tsa_score(s.view(), &ReliabilityWeights::uniform(3)).unwrap();
        assert_abs_diff_eq!(out.values()[0], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn logit_gradient_matches_finite_differences() {
        let s = array![[0.1, 0.8, 0.3], [0.9, 0.2, 0.5], [0.4, 0.4, 0.9], [0.7, 0.1, 0.2]];
        let y = [0u8, 1, 1, 0];
        let z = vec![0.3, -0.2, 0.1];
        let (_, dz) = bce_and_grad(s.view(), &y, &ReliabilityWeights::from_logits(z.clone()));
        for j in 0..3 {
            let mut zp = z.clone();
            zp[j] += 1e-6;
            let mut zm = z.clone();
            zm[j] -= 1e-6;
            let lp = bce_and_grad(s.view(), &y, &ReliabilityWeights::from_logits(zp)).0;
            let lm = bce_and_grad(s.view(), &y, &ReliabilityWeights::from_logits(zm)).0;
            assert_abs_diff_eq!(dz[j], (lp - lm) / 2e-6, epsilon = 1e-8);
        }
    }
}
