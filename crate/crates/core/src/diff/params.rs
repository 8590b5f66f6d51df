use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A parameter matrix with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param { value, grad }
    }
}

/// Named parameters in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    entries: Vec<(String, Param)>,
    seed: u64,
}

impl ParamStore {
    pub fn empty(seed: u64) -> Self {
        ParamStore {
            entries: Vec::new(),
            seed,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array2<f64>) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|(n, _)| *n == name) {
            return Err(Error::Validation(format!("duplicate parameter '{name}'")));
        }
        if value.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("parameter '{name}' is not finite")));
        }
        self.entries.push((name, Param::new(value)));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn position(&self, name: &str) -> Result<usize> {
        self.entries
            .iter()
            .position(|(n, _)| n == name)
            .ok_or_else(|| Error::Validation(format!("unknown parameter '{name}'")))
    }

    pub fn get(&self, name: &str) -> Result<&Param> {
        Ok(&self.entries[self.position(name)?].1)
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Param> {
        let k = self.position(name)?;
        Ok(&mut self.entries[k].1)
    }

    pub fn value(&self, name: &str) -> Result<&Array2<f64>> {
        Ok(&self.get(name)?.value)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.entries.iter().map(|(n, p)| (n.as_str(), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.entries.iter_mut().map(|(n, p)| (n.as_str(), p))
    }

    pub fn zero_grads(&mut self) {
        for (_, p) in &mut self.entries {
            p.grad.fill(0.0);
        }
    }

    /// Total scalar count across all parameters.
    pub fn num_coords(&self) -> usize {
        self.entries.iter().map(|(_, p)| p.value.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|(_, p)| p.value.iter().all(|v| v.is_finite()))
    }
}

/// Xavier-uniform initialization, bound `sqrt(6 / (rows + cols))`, drawn in
/// the order given from one seeded stream.
pub fn init_params(shapes: &[(&str, usize, usize)], seed: u64) -> Result<ParamStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::empty(seed);
    for &(name, rows, cols) in shapes {
        if rows == 0 || cols == 0 {
            return Err(Error::Validation(format!(
                "parameter '{name}' has empty shape {rows}x{cols}"
            )));
        }
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let value = Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound));
        store.insert(name, value)?;
    }
    Ok(store)
}

/// Serialized form of one matrix: `[[rows, cols], [row-major values]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "([usize; 2], Vec<f64>)", into = "([usize; 2], Vec<f64>)")]
pub struct WeightMatrix(pub Array2<f64>);

impl TryFrom<([usize; 2], Vec<f64>)> for WeightMatrix {
    type Error = String;

    fn try_from((shape, values): ([usize; 2], Vec<f64>)) -> std::result::Result<Self, String> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err("weight values must be finite".into());
        }
        Array2::from_shape_vec((shape[0], shape[1]), values)
            .map(WeightMatrix)
            .map_err(|_| format!("shape {}x{} does not match value count", shape[0], shape[1]))
    }
}

impl From<WeightMatrix> for ([usize; 2], Vec<f64>) {
    fn from(w: WeightMatrix) -> Self {
        let (r, c) = w.0.dim();
        (
            [r, c],
            w.0.as_standard_layout().iter().copied().collect(),
        )
    }
}
