use crate::error::{Error, Result};

/// Observations `v_{1:T}` stored row-major as `T × D`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    data: Vec<f64>,
    len: usize,
    dim: usize,
}

impl TimeSeries {
    pub fn new(data: Vec<f64>, len: usize, dim: usize) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::InvalidInput("time series must have T >= 1 and D >= 1".into()));
        }
        if data.len() != len * dim {
            return Err(Error::Shape(format!("{} values for a {len}x{dim} series", data.len())));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite observation at t={}", i / dim + 1)));
        }
        Ok(Self { data, len, dim })
    }

    pub fn univariate(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        Self::new(values, n, 1)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Shape("ragged observation rows".into()));
        }
        Self::new(rows.concat(), rows.len(), dim)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row `t` (0-based).
    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// First coordinate of row `t`.
    #[inline]
    pub fn scalar(&self, t: usize) -> f64 {
        self.data[t * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn require_univariate(&self) -> Result<()> {
        if self.dim != 1 {
            return Err(Error::Shape(format!(
                "autoregressive emission needs a univariate series, got D={}",
                self.dim
            )));
        }
        Ok(())
    }
}
