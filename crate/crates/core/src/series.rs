use crate::error::{Error, Result};
use crate::tensor::DenseTensor;

/// Matrix-of-matrices time series: `obs[0]` is the presample `Y_0`, followed
/// by `Y_1..Y_T`. Each observation is an `I1 × I2 × I3` tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorSeries {
    dims: [usize; 3],
    obs: Vec<DenseTensor>,
    labels: [Vec<String>; 3],
}

impl TensorSeries {
    pub fn new(dims: [usize; 3], obs: Vec<DenseTensor>) -> Result<Self> {
        let labels = default_labels(dims);
        Self::with_labels(dims, obs, labels)
    }

    pub fn with_labels(
        dims: [usize; 3],
        obs: Vec<DenseTensor>,
        labels: [Vec<String>; 3],
    ) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::TooShort("series needs at least a presample".into()));
        }
        for (t, y) in obs.iter().enumerate() {
            if y.shape() != dims {
                return Err(Error::ShapeMismatch(format!(
                    "observation {t} has shape {:?}, expected {dims:?}",
                    y.shape()
                )));
            }
        }
        for (k, l) in labels.iter().enumerate() {
            if l.len() != dims[k] {
                return Err(Error::ShapeMismatch(format!(
                    "axis {k} has {} labels for dimension {}",
                    l.len(),
                    dims[k]
                )));
            }
        }
        Ok(Self { dims, obs, labels })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn n_cells(&self) -> usize {
        self.dims.iter().product()
    }

    /// Number of modelled periods `T` (the presample is not counted).
    pub fn t_len(&self) -> usize {
        self.obs.len() - 1
    }

    /// Observation at time `t`, `0 ≤ t ≤ T`.
    pub fn y(&self, t: usize) -> &DenseTensor {
        &self.obs[t]
    }

    pub fn obs(&self) -> &[DenseTensor] {
        &self.obs
    }

    pub fn labels(&self) -> &[Vec<String>; 3] {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: [Vec<String>; 3]) -> Result<()> {
        *self = Self::with_labels(self.dims, std::mem::take(&mut self.obs), labels)?;
        Ok(())
    }

    /// Replaces observations, keeping labels.
    pub fn map_obs(&self, obs: Vec<DenseTensor>) -> Result<Self> {
        Self::with_labels(self.dims, obs, self.labels.clone())
    }

    /// Observed value of cell `(i1, i2, i3)` over all stored periods.
    pub fn cell_series(&self, idx: [usize; 3]) -> Vec<f64> {
        self.obs.iter().map(|y| y.get(&idx)).collect()
    }
}

pub fn default_labels(dims: [usize; 3]) -> [Vec<String>; 3] {
    dims.map(|d| (1..=d).map(|i| i.to_string()).collect())
}
