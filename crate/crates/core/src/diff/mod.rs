//! Parameter storage, the sparse propagation primitive, an Adam optimizer,
//! and a finite-difference checker for the hand-derived gradients.

mod adam;
mod gradcheck;
mod params;
mod sparse;

pub use adam::{Adam, AdamConfig};
pub use gradcheck::{backward_check, GradCheckReport, Objective, FD_STEP, MIN_CHECKED_COORDS};
pub use params::{init_params, Param, ParamStore, WeightMatrix};
pub use sparse::spmm;

use ndarray::Array2;

pub(crate) fn relu(z: &Array2<f64>) -> Array2<f64> {
    z.mapv(|v| v.max(0.0))
}

/// Zeroes `grad` wherever the pre-activation was not positive.
pub(crate) fn relu_backward(grad: &mut Array2<f64>, pre: &Array2<f64>) {
    ndarray::Zip::from(grad).and(pre).for_each(|g, &z| {
        if z <= 0.0 {
            *g = 0.0;
        }
    });
}
