use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::ScoreVector;

/// Channel weights derived from drift; lower drift earns more weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionWeights {
    pub w_nd: f64,
    pub w_sd: f64,
    pub tau: f64,
    pub eps_stab: f64,
    pub normalized: bool,
}

impl FusionWeights {
    /// Fixed, normalized weights (used by ablations and tests).
    pub fn fixed(w_nd: f64, w_sd: f64) -> Result<Self> {
        if !(w_nd >= 0.0 && w_sd >= 0.0 && (w_nd + w_sd).is_finite() && w_nd + w_sd > 0.0) {
            return Err(Error::Validation(format!("invalid fusion weights ({w_nd}, {w_sd})")));
        }
        let total = w_nd + w_sd;
        Ok(FusionWeights {
            w_nd: w_nd / total,
            w_sd: w_sd / total,
            tau: 0.0,
            eps_stab: 0.0,
            normalized: true,
        })
    }
}

/// `w = 1 / (d + eps)^tau` per channel, normalized to sum 1.
pub fn ada_weights(nd: f64, sd: f64, tau: f64, eps_stab: f64) -> Result<FusionWeights> {
    for (name, v) in [("nd", nd), ("sd", sd)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::Validation(format!("{name} = {v} must be finite and non-negative")));
        }
    }
    if !(tau.is_finite() && tau >= 0.0) || !(eps_stab.is_finite() && eps_stab >= 0.0) {
        return Err(Error::Validation(format!("invalid tau {tau} or eps {eps_stab}")));
    }
    // work in log space so tiny distances with large tau cannot overflow
    let lw_nd = -tau * (nd + eps_stab).ln();
    let lw_sd = -tau * (sd + eps_stab).ln();
    let top = lw_nd.max(lw_sd);
    if !top.is_finite() {
        return Err(Error::Numerical("fusion weights diverge; use a positive eps".into()));
    }
    let (a, b) = ((lw_nd - top).exp(), (lw_sd - top).exp());
    Ok(FusionWeights {
        w_nd: a / (a + b),
        w_sd: b / (a + b),
        tau,
        eps_stab,
        normalized: true,
    })
}

/// `w_nd * rs + w_sd * (1 - as)` over normalized channels.
pub fn fuse_scores(rs: &ScoreVector, as_: &ScoreVector, w: &FusionWeights) -> Result<ScoreVector> {
    if rs.len() != as_.len() {
        return Err(Error::Shape(format!(
            "channel lengths differ: {} vs {}",
            rs.len(),
            as_.len()
        )));
    }
    if !rs.is_normalized() || !as_.is_normalized() {
        return Err(Error::Validation("fusion expects normalized channels".into()));
    }
    let fused = rs
        .values()
        .iter()
        .zip(as_.values())
        .map(|(&r, &a)| (w.w_nd * r + w.w_sd * (1.0 - a)).clamp(0.0, 1.0))
        .collect();
    ScoreVector::unit(fused)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit(v: &[f64]) -> ScoreVector {
        ScoreVector::unit(v.to_vec()).unwrap()
    }

    #[test]
    fn equal_drift_gives_equal_weights() {
        let w = ada_weights(0.3, 0.3, 1.0, 1e-6).unwrap();
        assert_eq!((w.w_nd, w.w_sd), (0.5, 0.5));
    }

    #[test]
    fn hand_evaluated_weights() {
        let w = ada_weights(0.5, 0.25, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(w.w_nd, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w.w_sd, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_sharpness_is_uniform() {
        let w = ada_weights(0.9, 0.01, 0.0, 1e-6).unwrap();
        assert_eq!((w.w_nd, w.w_sd), (0.5, 0.5));
    }

    #[test]
    fn zero_drift_without_eps_is_numerical_error() {
        assert!(ada_weights(0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn channel_isolation() {
        let rs = unit(&[0.1, 0.7]);
        let as_ = unit(&[1.0, 1.0]);
        let only_rs = fuse_scores(&rs, &as_, &FusionWeights::fixed(1.0, 0.0).unwrap()).unwrap();
        assert_eq!(only_rs.values(), rs.values());
        let only_as = fuse_scores(&rs, &as_, &FusionWeights::fixed(0.0, 1.0).unwrap()).unwrap();
        assert_eq!(only_as.values(), &[0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_fusion() {
        let f = fuse_scores(&unit(&[0.8]), &unit(&[0.2]), &FusionWeights::fixed(0.5, 0.5).unwrap()).unwrap();
        assert_abs_diff_eq!(f.values()[0], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn length_mismatch_is_error() {
        let w = FusionWeights::fixed(0.5, 0.5).unwrap();
        assert!(fuse_scores(&unit(&[0.1]), &unit(&[0.1, 0.2]), &w).is_err());
    }
}
