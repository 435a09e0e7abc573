//! Data-driven interpolators used to densify a sampled knowledge space.

mod linear;
mod mlp;

use serde::{Deserialize, Serialize};

pub use linear::LinearInterpolator;
pub use mlp::{train, Mlp, MlpDocument, TrainConfig, TrainReport, MIN_ROWS, MLP_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum SurrogateError {
    #[error("no rows to evaluate")]
    EmptyInput,
    #[error("need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("row {row} has {got} columns, expected {expected}")]
    ShapeMismatch {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite value in training data at row {0}")]
    NonFinite(usize),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    DivergedTraining { epoch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid model document: {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Maps decision vectors to KPI vectors.
pub trait Interpolator: Sync {
    fn n_inputs(&self) -> usize;
    fn n_outputs(&self) -> usize;
    fn predict(&self, inputs: &[Vec<f64>]) -> Vec<Vec<f64>>;
}

/// Per-column min-max scaling to [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    /// Fits the column ranges of `rows`. Constant columns get a unit range so
    /// that `max > min` always holds.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, |r| r.len());
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for r in rows {
            for k in 0..d {
                min[k] = min[k].min(r[k]);
                max[k] = max[k].max(r[k]);
            }
        }
        for k in 0..d {
            if !(max[k] - min[k] > 1e-12 * min[k].abs().max(1.0)) {
                max[k] = min[k] + 1.0;
            }
        }
        MinMax { min, max }
    }

    #[inline]
    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.min[k]) / (self.max[k] - self.min[k]))
            .collect()
    }

    #[inline]
    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, v)| self.min[k] + v * (self.max[k] - self.min[k]))
            .collect()
    }
}

/// Mean percentage error per column, `mean(|pred - label| / |label|) * 100`.
/// Rows whose label magnitude is below 1e-12 are left out of that column's
/// mean; a column with no usable rows reports 0.
pub fn mpe(predictions: &[Vec<f64>], labels: &[Vec<f64>]) -> Result<Vec<f64>, SurrogateError> {
    if labels.is_empty() {
        return Err(SurrogateError::EmptyInput);
    }
    if predictions.len() != labels.len() {
        return Err(SurrogateError::ShapeMismatch {
            row: predictions.len().min(labels.len()),
            got: predictions.len(),
            expected: labels.len(),
        });
    }
    let d = labels[0].len();
    let mut sum = vec![0.0; d];
    let mut count = vec![0usize; d];
    for (row, (p, l)) in predictions.iter().zip(labels).enumerate() {
        if p.len() != d || l.len() != d {
            return Err(SurrogateError::ShapeMismatch {
                row,
                got: p.len().min(l.len()),
                expected: d,
            });
        }
        for k in 0..d {
            if l[k].abs() >= 1e-12 {
                sum[k] += (p[k] - l[k]).abs() / l[k].abs();
                count[k] += 1;
            }
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c == 0 { 0.0 } else { 100.0 * s / c as f64 })
        .collect())
}
