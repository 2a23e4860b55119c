//! Segment log-likelihoods `log p(v_{a:b-1} | s)` over 0-based half-open ranges `[a, b)`.

use ndarray::{Array2, Array3};

use crate::error::Result;
use crate::model::{ArEmission, Emission, TimeSeries};

/// Source of whole-segment likelihoods. Implementations are read-only and shareable across threads.
pub trait SegmentLikelihood: Sync {
    fn len(&self) -> usize;

    fn n_regimes(&self) -> usize;

    /// `log p(v_{start..end} | regime)` for `start < end ≤ len()`.
    fn log_segment(&self, start: usize, end: usize, regime: usize) -> f64;

    /// Fills `out[l - 1]` with the segment `[start, start + l)` for every `l ≤ out.len()`.
    fn fill_from(&self, start: usize, regime: usize, out: &mut [f64]) {
        for (l, o) in out.iter_mut().enumerate() {
            *o = self.log_segment(start, start + l + 1, regime);
        }
    }

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Observations independent within a segment given the regime.
#[derive(Debug, Clone)]
pub struct IidSegments {
    loglik: Array2<f64>,
}

impl IidSegments {
    pub fn new(loglik: Array2<f64>) -> Self {
        Self { loglik }
    }
}

impl SegmentLikelihood for IidSegments {
    fn len(&self) -> usize {
        self.loglik.nrows()
    }

    fn n_regimes(&self) -> usize {
        self.loglik.ncols()
    }

    fn log_segment(&self, start: usize, end: usize, regime: usize) -> f64 {
        (start..end).map(|t| self.loglik[[t, regime]]).sum()
    }

    fn fill_from(&self, start: usize, regime: usize, out: &mut [f64]) {
        let mut acc = 0.0;
        for (l, o) in out.iter_mut().enumerate() {
            acc += self.loglik[[start + l, regime]];
            *o = acc;
        }
    }
}

/// Autoregression whose context never reaches back before the segment start.
#[derive(Debug, Clone)]
pub struct ArSegments {
    table: Array3<f64>,
    order: usize,
}

impl ArSegments {
    pub fn new(ar: &ArEmission, series: &TimeSeries) -> Result<Self> {
        Ok(Self { table: ar.context_table(series)?, order: ar.order() })
    }
}

impl SegmentLikelihood for ArSegments {
    fn len(&self) -> usize {
        self.table.dim().0
    }

    fn n_regimes(&self) -> usize {
        self.table.dim().1
    }

    fn log_segment(&self, start: usize, end: usize, regime: usize) -> f64 {
        (start..end).map(|t| self.table[[t, regime, self.order.min(t - start)]]).sum()
    }

    fn fill_from(&self, start: usize, regime: usize, out: &mut [f64]) {
        let mut acc = 0.0;
        for (l, o) in out.iter_mut().enumerate() {
            acc += self.table[[start + l, regime, self.order.min(l)]];
            *o = acc;
        }
    }
}

/// Memo of every segment of length `1..=max_len`, stored as `[start, regime, len - 1]`.
#[derive(Debug, Clone)]
pub struct CachedSegments {
    cache: Array3<f64>,
}

impl CachedSegments {
    pub fn new<P: SegmentLikelihood + ?Sized>(inner: &P, max_len: usize) -> Self {
        let (n, s) = (inner.len(), inner.n_regimes());
        let mut cache = Array3::from_elem((n, s, max_len), f64::NAN);
        let mut buf = vec![0.0; max_len];
        for a in 0..n {
            let m = max_len.min(n - a);
            for r in 0..s {
                inner.fill_from(a, r, &mut buf[..m]);
                for l in 0..m {
                    cache[[a, r, l]] = buf[l];
                }
            }
        }
        Self { cache }
    }
}

impl SegmentLikelihood for CachedSegments {
    fn len(&self) -> usize {
        self.cache.dim().0
    }

    fn n_regimes(&self) -> usize {
        self.cache.dim().1
    }

    fn log_segment(&self, start: usize, end: usize, regime: usize) -> f64 {
        self.cache[[start, regime, end - start - 1]]
    }
}

/// Provider for a segmental model's emission: AR emissions use segment-truncated context.
pub fn emission_segments(
    emission: &Emission,
    series: &TimeSeries,
) -> Result<Box<dyn SegmentLikelihood>> {
    Ok(match emission {
        Emission::Ar(ar) => Box::new(ArSegments::new(ar, series)?),
        e => Box::new(IidSegments::new(e.log_lik_table(series)?)),
    })
}
