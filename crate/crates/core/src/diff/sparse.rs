use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;
use crate::par;

/// Sparse-dense product `a . x`, one output row per task.
pub fn spmm(a: &NormalizedAdjacency, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let n = a.num_nodes();
    if x.nrows() != n {
        return Err(Error::Shape(format!(
            "adjacency is {n}x{n} but right operand has {} rows",
            x.nrows()
        )));
    }
    let mut out = Array2::zeros((n, x.ncols()));
    par::for_each_row_mut(&mut out, |i, mut row| {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            row.scaled_add(v, &x.row(j));
        }
    });
    Ok(out)
}
