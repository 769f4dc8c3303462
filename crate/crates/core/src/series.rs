//! Time-series containers, delay embedding and model configuration.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VolterraError};

/// A scalar time series ordered oldest to newest.
///
/// Construction rejects empty and non-finite data, so downstream code can
/// assume every stored value is a finite `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
    label: Option<String>,
}

impl TimeSeries {
    /// Builds a series from raw values.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(VolterraError::EmptySeries);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VolterraError::NonFiniteValue { index });
        }
        Ok(Self { values, label: None })
    }

    /// Builds a series and attaches a display label.
    pub fn with_label(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        let mut series = Self::new(values)?;
        series.label = Some(label.into());
        Ok(series)
    }

    /// The stored values, oldest first.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of observations.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: empty series cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Optional label, typically the source file stem or process name.
    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Arithmetic mean of the series.
    pub fn mean(&self) -> f64 {
        crate::metrics::mean(&self.values)
    }

    /// Sample standard deviation (denominator `n - 1`, zero for one point).
    pub fn std_dev(&self) -> f64 {
        crate::metrics::std_dev(&self.values)
    }

    /// The first `n` observations as a new series.
    pub fn head(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.values.len() {
            return Err(VolterraError::InsufficientData {
                reason: format!("cannot take {} of {} observations", n, self.values.len()),
            });
        }
        let mut series = Self::new(self.values[..n].to_vec())?;
        series.label = self.label.clone();
        Ok(series)
    }

    /// Everything from observation `n` onwards as a new series.
    pub fn tail_from(&self, n: usize) -> Result<Self> {
        if n >= self.values.len() {
            return Err(VolterraError::InsufficientData {
                reason: format!("cannot drop {} of {} observations", n, self.values.len()),
            });
        }
        let mut series = Self::new(self.values[n..].to_vec())?;
        series.label = self.label.clone();
        Ok(series)
    }
}

/// Delay-embedded regression data: each row holds `memory` consecutive values
/// in ascending time order and the paired target is the value that follows
/// the window.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    inputs: Array2<f64>,
    targets: Array1<f64>,
}

impl TrajectoryMatrix {
    /// Builds a trajectory matrix from a pre-assembled input matrix and
    /// target vector, validating shapes and finiteness.
    pub fn from_parts(inputs: Array2<f64>, targets: Array1<f64>) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(VolterraError::LengthMismatch {
                left: inputs.nrows(),
                right: targets.len(),
            });
        }
        if inputs.nrows() == 0 {
            return Err(VolterraError::EmptyInput);
        }
        if inputs.ncols() == 0 {
            return Err(VolterraError::InvalidMemory);
        }
        if inputs.iter().any(|v| !v.is_finite()) || targets.iter().any(|v| !v.is_finite()) {
            return Err(VolterraError::NonFiniteInput);
        }
        Ok(Self { inputs, targets })
    }

    /// Input rows, one embedding window per row.
    pub fn inputs(&self) -> &Array2<f64> {
        &self.inputs
    }

    /// Targets aligned with the input rows.
    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    /// Window length shared by all rows.
    pub fn memory(&self) -> usize {
        self.inputs.ncols()
    }

    /// Number of rows.
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    /// Always false: empty matrices cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// A single input row.
    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.inputs.row(i)
    }

    /// A new matrix containing only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(VolterraError::EmptyInput);
        }
        let mut inputs = Array2::zeros((rows.len(), self.memory()));
        let mut targets = Array1::zeros(rows.len());
        for (out, &r) in rows.iter().enumerate() {
            inputs.row_mut(out).assign(&self.inputs.row(r));
            targets[out] = self.targets[r];
        }
        Ok(Self { inputs, targets })
    }
}

/// Delay-embeds a series with window length `memory`.
///
/// A series of length `T` produces `T - memory` rows; row `i` holds
/// `values[i..i + memory]` in ascending time order and its target is
/// `values[i + memory]`.
pub fn embed(series: &TimeSeries, memory: usize) -> Result<TrajectoryMatrix> {
    if memory == 0 {
        return Err(VolterraError::InvalidMemory);
    }
    let values = series.values();
    if values.len() <= memory {
        return Err(VolterraError::WindowTooLong {
            memory,
            len: values.len(),
        });
    }
    let rows = values.len() - memory;
    let mut inputs = Array2::zeros((rows, memory));
    let mut targets = Array1::zeros(rows);
    for i in 0..rows {
        for j in 0..memory {
            inputs[[i, j]] = values[i + j];
        }
        targets[i] = values[i + memory];
    }
    TrajectoryMatrix::from_parts(inputs, targets)
}

/// Hyperparameters of a fitted polynomial Volterra model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Window length: how many past values feed each prediction.
    pub memory: usize,
    /// Polynomial order of the kernel.
    pub order: usize,
    /// Ridge regularisation weight.
    pub lambda: f64,
}

impl ModelConfig {
    /// Validated constructor: `memory >= 1` and `lambda` finite and
    /// non-negative. `order == 0` is allowed and denotes a constant model or
    /// a kernel without a polynomial order.
    pub fn new(memory: usize, order: usize, lambda: f64) -> Result<Self> {
        if memory == 0 {
            return Err(VolterraError::InvalidMemory);
        }
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(VolterraError::InvalidConfig {
                reason: format!("lambda must be finite and non-negative, got {lambda}"),
            });
        }
        Ok(Self {
            memory,
            order,
            lambda,
        })
    }
}
