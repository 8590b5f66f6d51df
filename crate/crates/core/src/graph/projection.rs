//! Mean-centered PCA onto a shared latent width.
//!
//! Graphs from different domains carry features of different widths, so each
//! graph gets its own projector. Inputs narrower than the latent width are
//! zero-padded; the padded coordinates become trailing zero-variance axes.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fits use at most this many rows; larger inputs are subsampled by seed.
pub const MAX_FIT_ROWS: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureProjector {
    input_dim: usize,
    output_dim: usize,
    mean: Array1<f64>,
    /// `max(input_dim, output_dim) x output_dim`, orthonormal columns.
    basis: Array2<f64>,
    variances: Vec<f64>,
}

impl FeatureProjector {
    pub fn fit(features: ArrayView2<'_, f64>, output_dim: usize, seed: u64) -> Result<Self> {
        let (rows, input_dim) = features.dim();
        if output_dim == 0 {
            return Err(Error::Validation("projection width must be at least 1".into()));
        }
        if input_dim == 0 {
            return Err(Error::Validation("cannot project zero-width features".into()));
        }
        if output_dim > rows {
            return Err(Error::Validation(format!(
                "projection width {output_dim} exceeds the {rows} available rows"
            )));
        }

        let sample = if rows > MAX_FIT_ROWS {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = rand::seq::index::sample(&mut rng, rows, MAX_FIT_ROWS).into_vec();
            idx.sort_unstable();
            features.select(Axis(0), &idx)
        } else {
            features.to_owned()
        };

        let mean = sample.mean_axis(Axis(0)).expect("non-empty sample");
        let centered = &sample - &mean;
        let denom = (sample.nrows().max(2) - 1) as f64;
        let cov = centered.t().dot(&centered) / denom;

        let cov = DMatrix::from_fn(input_dim, input_dim, |i, j| 0.5 * (cov[[i, j]] + cov[[j, i]]));
        let eig = SymmetricEigen::new(cov);

        let mut order: Vec<usize> = (0..input_dim).collect();
        order.sort_by(|&a, &b| {
            eig.eigenvalues[b]
                .partial_cmp(&eig.eigenvalues[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });

        let padded = input_dim.max(output_dim);
        let mut basis = Array2::zeros((padded, output_dim));
        let mut variances = Vec::with_capacity(output_dim);
        for (col, &k) in order.iter().take(output_dim).enumerate() {
            let v = eig.eigenvectors.column(k);
            // sign convention: largest-magnitude component is positive
            let pivot = (0..input_dim)
                .max_by(|&a, &b| v[a].abs().partial_cmp(&v[b].abs()).unwrap().then(b.cmp(&a)))
                .unwrap_or(0);
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            for r in 0..input_dim {
                basis[[r, col]] = sign * v[r];
            }
            variances.push(eig.eigenvalues[k].max(0.0));
        }
        for col in input_dim..output_dim {
            basis[[col, col]] = 1.0;
            variances.push(0.0);
        }

        Ok(FeatureProjector {
            input_dim,
            output_dim,
            mean,
            basis,
            variances,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &Array2<f64> {
        &self.basis
    }

    /// Variance captured by each output axis, non-increasing.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    /// `(features - mean) . basis`, zero-padding the input when needed.
    pub fn apply(&self, features: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if features.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "projector expects {} feature columns, got {}",
                self.input_dim,
                features.ncols()
            )));
        }
        let centered = &features - &self.mean;
        // padded rows of the basis multiply zeros, so only the leading block matters
        let out = centered.dot(&self.basis.slice(s![..self.input_dim, ..]));
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("projection produced non-finite values".into()));
        }
        Ok(out)
    }
}

/// Fits one projector per matrix; each graph's feature space is independent.
pub fn fit_projections(
    feature_matrices: &[ArrayView2<'_, f64>],
    output_dim: usize,
    seed: u64,
) -> Result<Vec<FeatureProjector>> {
    if feature_matrices.is_empty() {
        return Err(Error::Validation("no feature matrices to fit".into()));
    }
    feature_matrices
        .iter()
        .enumerate()
        .map(|(i, m)| FeatureProjector::fit(m.view(), output_dim, seed.wrapping_add(i as u64)))
        .collect()
}
