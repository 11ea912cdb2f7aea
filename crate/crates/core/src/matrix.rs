use ndarray::{s, Array2, ArrayView2};

use crate::error::{Error, Result};

/// A T×p multivariate time series with strictly positive entries.
///
/// Rows are time points and columns are variables. Time indices exposed by
/// the rest of the crate are split offsets: a change point `q` means rows
/// `0..q` form the left block, which is the same as saying the 1-based time
/// point `q` is the last point before the change.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeriesMatrix {
    values: Array2<f64>,
    labels: Option<Vec<String>>,
    timestamps: Option<Vec<String>>,
}

impl TimeSeriesMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (t, p) = values.dim();
        if t < 2 || p < 2 {
            return Err(Error::Data(format!(
                "time series must have at least 2 time points and 2 variables, got {t}x{p}"
            )));
        }
        for ((row, col), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            if v <= 0.0 {
                return Err(Error::NonPositive { row, col, value: v });
            }
        }
        Ok(Self {
            values,
            labels: None,
            timestamps: None,
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_vars() {
            return Err(Error::Dimension(format!(
                "{} column labels for {} variables",
                labels.len(),
                self.n_vars()
            )));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != self.n_times() {
            return Err(Error::Dimension(format!(
                "{} timestamps for {} time points",
                timestamps.len(),
                self.n_times()
            )));
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    /// Number of time points T.
    pub fn n_times(&self) -> usize {
        self.values.nrows()
    }

    /// Number of variables p.
    pub fn n_vars(&self) -> usize {
        self.values.ncols()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    /// Rows `start..end`.
    pub fn rows(&self, start: usize, end: usize) -> ArrayView2<'_, f64> {
        self.values.slice(s![start..end, ..])
    }
}
