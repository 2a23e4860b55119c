use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ln;

pub(crate) const PROB_TOL: f64 = 1e-12;

/// Initial regime distribution and column-stochastic switch matrix.
///
/// `switch[[j, i]]` is the probability of moving to regime `j` from regime `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    initial: Array1<f64>,
    switch: Array2<f64>,
    log_initial: Array1<f64>,
    log_switch: Array2<f64>,
}

impl TransitionModel {
    /// Validates at `1e-12` and renormalises once.
    pub fn new(initial: Vec<f64>, switch: Array2<f64>) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::InvalidModel("transition model needs at least one regime".into()));
        }
        if switch.nrows() != n || switch.ncols() != n {
            return Err(Error::Shape(format!(
                "switch matrix is {}x{}, expected {n}x{n}",
                switch.nrows(),
                switch.ncols()
            )));
        }
        let mut initial = Array1::from(initial);
        check_prob_vector(initial.as_slice().unwrap(), "initial distribution")?;
        let total = initial.sum();
        initial /= total;
        let mut switch = switch;
        for i in 0..n {
            let col: Vec<f64> = switch.column(i).to_vec();
            check_prob_vector(&col, &format!("column {i}")).map_err(|_| {
                Error::InvalidModel(format!("column {i} not stochastic"))
            })?;
            let total: f64 = col.iter().sum();
            switch.column_mut(i).mapv_inplace(|p| p / total);
        }
        let log_initial = initial.mapv(ln);
        let log_switch = switch.mapv(ln);
        Ok(Self { initial, switch, log_initial, log_switch })
    }

    /// Builds from a row-major nested vector holding `switch[j][i]`.
    pub fn from_rows(initial: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(initial, rows_to_array(rows)?)
    }

    pub fn uniform(n_regimes: usize, stay: f64) -> Result<Self> {
        let mut switch = Array2::zeros((n_regimes, n_regimes));
        for i in 0..n_regimes {
            for j in 0..n_regimes {
                switch[[j, i]] = if i == j {
                    if n_regimes == 1 { 1.0 } else { stay }
                } else {
                    (1.0 - stay) / (n_regimes - 1) as f64
                };
            }
        }
        Self::new(vec![1.0 / n_regimes as f64; n_regimes], switch)
    }

    pub fn n_regimes(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &Array1<f64> {
        &self.initial
    }

    pub fn switch(&self) -> &Array2<f64> {
        &self.switch
    }

    pub fn log_initial(&self) -> &Array1<f64> {
        &self.log_initial
    }

    pub fn log_switch(&self) -> &Array2<f64> {
        &self.log_switch
    }

    /// `p(s_t = to | s_{t-1} = from)`.
    #[inline]
    pub fn p(&self, to: usize, from: usize) -> f64 {
        self.switch[[to, from]]
    }

    #[inline]
    pub fn log_p(&self, to: usize, from: usize) -> f64 {
        self.log_switch[[to, from]]
    }

    pub fn has_zero_diagonal(&self) -> bool {
        (0..self.n_regimes()).all(|i| self.switch[[i, i]] == 0.0)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.switch.outer_iter().map(|r| r.to_vec()).collect()
    }
}

pub(crate) fn check_prob_vector(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::InvalidModel(format!("{what} has negative or non-finite entries")));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidModel(format!("{what} sums to {total}, not 1")));
    }
    Ok(())
}

pub(crate) fn rows_to_array(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((nr, nc), flat).map_err(|e| Error::Shape(e.to_string()))
}

/// Serialized form of a [`TransitionModel`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionDoc {
    pub initial: Vec<f64>,
    pub switch: Vec<Vec<f64>>,
}

impl TransitionDoc {
    pub fn build(&self) -> Result<TransitionModel> {
        TransitionModel::from_rows(self.initial.clone(), &self.switch)
    }
}

impl From<&TransitionModel> for TransitionDoc {
    fn from(t: &TransitionModel) -> Self {
        Self { initial: t.initial.to_vec(), switch: t.to_rows() }
    }
}
