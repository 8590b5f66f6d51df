use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam moments for one [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Array2<f64>>,
    second: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamStore) -> Self {
        let zeros = || -> Vec<Array2<f64>> {
            params
                .iter()
                .map(|(_, p)| Array2::zeros(p.value.raw_dim()))
                .collect()
        };
        Adam {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    /// Applies one bias-corrected update and zeroes the gradients.
    pub fn step(&mut self, params: &mut ParamStore) -> Result<()> {
        if params.len() != self.first.len() {
            return Err(Error::Shape("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);

        for (((name, p), m), v) in params
            .iter_mut()
            .zip(self.first.iter_mut())
            .zip(self.second.iter_mut())
        {
            if p.grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical(format!("gradient of '{name}' is not finite")));
            }
            ndarray::Zip::from(&mut p.value)
                .and(&mut p.grad)
                .and(m)
                .and(v)
                .for_each(|w, g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * *g;
                    *v = beta2 * *v + (1.0 - beta2) * *g * *g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
                    *g = 0.0;
                });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::init_params;

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = init_params(&[("w", 3, 3)], 0).unwrap();
        let before = p.clone();
        let mut adam = Adam::new(AdamConfig::default(), &p);
        adam.step(&mut p).unwrap();
        assert_eq!(p.value("w").unwrap(), before.value("w").unwrap());
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = init_params(&[("w", 2, 2)], 0).unwrap();
        let before = p.value("w").unwrap().clone();
        p.get_mut("w").unwrap().grad.fill(3.7);
        let cfg = AdamConfig::default();
        let mut adam = Adam::new(cfg, &p);
        adam.step(&mut p).unwrap();
        for (a, b) in before.iter().zip(p.value("w").unwrap()) {
            assert!(((a - b) - cfg.learning_rate).abs() < 1e-9);
        }
        assert!(p.get("w").unwrap().grad.iter().all(|&g| g == 0.0));
        assert_eq!(adam.steps_taken(), 1);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut p = init_params(&[("w", 3, 4)], 5).unwrap();
        let target = Array2::from_shape_fn((3, 4), |(i, j)| (i as f64) - 0.5 * j as f64);
        let mut adam = Adam::new(
            AdamConfig {
                learning_rate: 0.01,
                ..AdamConfig::default()
            },
            &p,
        );
        for _ in 0..1500 {
            let w = p.value("w").unwrap().clone();
            p.get_mut("w").unwrap().grad = 2.0 * (&w - &target);
            adam.step(&mut p).unwrap();
        }
        let dist = (p.value("w").unwrap() - &target).mapv(|v| v * v).sum().sqrt();
        assert!(dist < 1e-2, "distance {dist}");
    }

    #[test]
    fn non_finite_gradient_is_numerical_error() {
        let mut p = init_params(&[("w", 1, 1)], 0).unwrap();
        p.get_mut("w").unwrap().grad.fill(f64::NAN);
        let mut adam = Adam::new(AdamConfig::default(), &p);
        assert!(adam.step(&mut p).unwrap_err().is_numerical());
    }
}
