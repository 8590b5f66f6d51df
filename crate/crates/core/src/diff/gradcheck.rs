use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamStore;
use crate::error::{Error, Result};
use crate::par;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-4;
/// Lower bound on the number of coordinates compared per check.
pub const MIN_CHECKED_COORDS: usize = 32;
/// Gradients smaller than this are compared absolutely rather than relatively.
const SCALE_FLOOR: f64 = 1e-6;

/// A scalar loss over a [`ParamStore`] with a hand-derived gradient.
pub trait Objective: Sync {
    /// Evaluates the loss and accumulates its gradient into `params`.
    fn loss_and_grad(&self, params: &mut ParamStore) -> Result<f64>;

    /// Loss only. The default clones and discards the gradient.
    fn loss(&self, params: &ParamStore) -> Result<f64> {
        let mut scratch = params.clone();
        scratch.zero_grads();
        self.loss_and_grad(&mut scratch)
    }

    /// Sign pattern of every piecewise-linear switch (ReLU, hinge) at
    /// `params`. A coordinate whose perturbation flips this pattern straddles
    /// a kink and is excluded from the comparison.
    fn activation_pattern(&self, _params: &ParamStore) -> Result<Option<Vec<bool>>> {
        Ok(None)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub excluded_at_kink: usize,
    pub max_relative_error: f64,
    /// `(parameter, flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
    pub tolerance: f64,
    pub passed: bool,
}

/// Compares the analytic gradient of `objective` against central finite
/// differences on `samples` (at least [`MIN_CHECKED_COORDS`]) seeded random
/// coordinates, spread across every parameter.
pub fn backward_check<O: Objective>(
    objective: &O,
    params: &ParamStore,
    tol: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut analytic = params.clone();
    analytic.zero_grads();
    let base = objective.loss_and_grad(&mut analytic)?;
    if !base.is_finite() {
        return Err(Error::Numerical(format!("loss is {base}")));
    }
    let base_pattern = objective.activation_pattern(params)?;

    let samples = samples.max(MIN_CHECKED_COORDS);
    let names: Vec<(String, usize)> = params
        .iter()
        .map(|(n, p)| (n.to_string(), p.value.len()))
        .collect();
    let per_param = samples.div_ceil(names.len().max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coords = Vec::new();
    for (name, len) in &names {
        let take = per_param.min(*len);
        for k in index::sample(&mut rng, *len, take) {
            coords.push((name.clone(), k));
        }
    }

    let outcomes = par::map_slice(&coords, |(name, k)| -> Result<Option<(f64, f64)>> {
        let eval = |delta: f64| -> Result<(f64, Option<Vec<bool>>)> {
            let mut p = params.clone();
            let slot = p
                .get_mut(name)?
                .value
                .as_slice_mut()
                .expect("standard layout parameters");
            slot[*k] += delta;
            let loss = objective.loss(&p)?;
            Ok((loss, objective.activation_pattern(&p)?))
        };
        let (plus, pat_plus) = eval(FD_STEP)?;
        let (minus, pat_minus) = eval(-FD_STEP)?;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numerical(format!("perturbed loss at {name}[{k}] is not finite")));
        }
        if pat_plus != base_pattern || pat_minus != base_pattern {
            return Ok(None);
        }
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic.get(name)?.grad.as_slice().expect("standard layout")[*k];
        Ok(Some((a, numeric)))
    });

    let mut report = GradCheckReport {
        checked: 0,
        excluded_at_kink: 0,
        max_relative_error: 0.0,
        worst: None,
        tolerance: tol,
        passed: true,
    };
    for ((name, k), outcome) in coords.iter().zip(outcomes) {
        match outcome? {
            None => report.excluded_at_kink += 1,
            Some((a, n)) => {
                report.checked += 1;
                let rel = (a - n).abs() / a.abs().max(n.abs()).max(SCALE_FLOOR);
                if report.worst.is_none() || rel > report.max_relative_error {
                    report.max_relative_error = rel;
                    report.worst = Some((name.clone(), *k, a, n));
                }
            }
        }
    }
    report.passed = report.checked > 0 && report.max_relative_error <= tol;
    Ok(report)
}
