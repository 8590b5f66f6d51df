use crate::error::{Error, Result};
use crate::scores::ScoreVector;

fn check(scores: &ScoreVector, labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.values().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("scores must be finite".into()));
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    Ok((pos, labels.len() - pos))
}

/// Node indices sorted by score and grouped into runs of equal scores.
fn tie_groups(values: &[f64], descending: bool) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if descending {
            c.reverse()
        } else {
            c
        }
    });
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if values[g[0]] == values[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Area under the ROC curve via the rank-sum statistic; ties share the
/// average rank.
pub fn auroc(scores: &ScoreVector, labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation("AUROC needs both classes".into()));
    }
    // twice the rank sum keeps half-ranks integral
    let mut twice_rank_sum: u128 = 0;
    let mut start = 0usize;
    for group in tie_groups(scores.values(), false) {
        let k = group.len();
        // ranks start+1..=start+k average to (2*start + k + 1) / 2
        let twice_avg = (2 * start + k + 1) as u128;
        let p = group.iter().filter(|&&i| labels[i] != 0).count() as u128;
        twice_rank_sum += p * twice_avg;
        start += k;
    }
    let p = pos as u128;
    let twice_u = twice_rank_sum - p * (p + 1);
    Ok(twice_u as f64 / (2.0 * pos as f64 * neg as f64))
}

/// Average precision over a descending sweep; tied scores enter together.
pub fn auprc(scores: &ScoreVector, labels: &[u8]) -> Result<f64> {
    let (pos, _) = check(scores, labels)?;
    if pos == 0 {
        return Err(Error::Validation("AUPRC needs at least one positive".into()));
    }
    let mut tp = 0usize;
    let mut seen = 0usize;
    let mut ap = 0.0;
    for group in tie_groups(scores.values(), true) {
        let p = group.iter().filter(|&&i| labels[i] != 0).count();
        tp += p;
        seen += group.len();
        if p > 0 {
            ap += (tp as f64 / seen as f64) * (p as f64 / pos as f64);
        }
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sv(v: &[f64]) -> ScoreVector {
        ScoreVector::raw(v.to_vec())
    }

    #[test]
    fn perfect_separation() {
        let s = sv(&[0.1, 0.9, 0.2, 0.8]);
        let y = [0, 1, 0, 1];
        assert_eq!(auroc(&s, &y).unwrap(), 1.0);
        assert_eq!(auprc(&s, &y).unwrap(), 1.0);
    }

    #[test]
    fn all_tied_is_half() {
        let s = sv(&[0.5; 6]);
        let y = [0, 1, 0, 1, 0, 0];
        assert_eq!(auroc(&s, &y).unwrap(), 0.5);
        assert_abs_diff_eq!(auprc(&s, &y).unwrap(), 2.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn single_positive_at_rank_r() {
        let s = sv(&[0.9, 0.8, 0.7, 0.6, 0.5]);
        for r in 0..5 {
            let mut y = [0u8; 5];
            y[r] = 1;
            assert_abs_diff_eq!(auprc(&s, &y).unwrap(), 1.0 / (r + 1) as f64, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_class_rejected() {
        assert!(auroc(&sv(&[0.1, 0.2]), &[0, 0]).is_err());
        assert!(auprc(&sv(&[0.1, 0.2]), &[0, 0]).is_err());
        assert!(auroc(&sv(&[0.1]), &[0, 1]).is_err());
    }
}
