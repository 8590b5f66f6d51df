use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-node anomaly scores of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    values: Vec<f64>,
    normalized: bool,
}

impl ScoreVector {
    pub fn raw(values: Vec<f64>) -> Self {
        ScoreVector {
            values,
            normalized: false,
        }
    }

    /// Wraps values already in `[0, 1]`.
    pub fn unit(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Validation(format!("score {v} outside [0, 1]")));
        }
        Ok(ScoreVector {
            values,
            normalized: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Min-max rescale to `[0, 1]`; a constant vector maps to all 0.5.
    pub fn min_max_normalized(&self) -> ScoreVector {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let range = hi - lo;
        let values = if range.is_nan() || range <= 0.0 {
            vec![0.5; self.values.len()]
        } else {
            self.values
                .iter()
                .map(|&v| ((v - lo) / range).clamp(0.0, 1.0))
                .collect()
        };
        ScoreVector {
            values,
            normalized: true,
        }
    }

    /// `1 - s` for a normalized channel.
    pub fn complement(&self) -> Result<ScoreVector> {
        if !self.normalized {
            return Err(Error::Validation("complement needs a normalized channel".into()));
        }
        Ok(ScoreVector {
            values: self.values.iter().map(|v| 1.0 - v).collect(),
            normalized: true,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_max_maps_to_unit_interval() {
        let s = ScoreVector::raw(vec![2.0, 4.0, 3.0]).min_max_normalized();
        assert_eq!(s.values(), &[0.0, 1.0, 0.5]);
        assert!(s.is_normalized());
    }

    #[test]
    fn constant_vector_maps_to_half() {
        let s = ScoreVector::raw(vec![7.0; 4]).min_max_normalized();
        assert_eq!(s.values(), &[0.5; 4]);
    }

    #[test]
    fn complement_requires_normalization() {
        assert!(ScoreVector::raw(vec![0.2]).complement().is_err());
        let c = ScoreVector::unit(vec![0.25, 1.0]).unwrap().complement().unwrap();
        assert_eq!(c.values(), &[0.75, 0.0]);
    }
}
