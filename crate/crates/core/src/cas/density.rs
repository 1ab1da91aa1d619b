use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BIN_COUNT: usize = 100;

/// Laplace-smoothed histogram over `[min, max]` of one feature's responses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityModel {
    min: f64,
    max: f64,
    probabilities: Vec<f64>,
}

impl DensityModel {
    /// Fits `bin_count` equal-width bins; bin `b` gets
    /// `(count_b + 1) / (N + bin_count)`.
    pub fn fit(values: impl IntoIterator<Item = f64> + Clone, bin_count: usize) -> Result<Self> {
        if bin_count == 0 {
            return Err(Error::InvalidValue("bin count must be >= 1".into()));
        }
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.clone() {
            if !v.is_finite() {
                return Err(Error::InvalidValue(format!("non-finite response {v}")));
            }
            min = min.min(v);
            max = max.max(v);
        }
        if min > max {
            return Err(Error::InvalidValue("no responses to fit".into()));
        }
        let mut model = DensityModel {
            min,
            max,
            probabilities: vec![0.0; bin_count],
        };
        let mut counts = vec![0u64; bin_count];
        let mut total = 0u64;
        for v in values {
            counts[model.bin(v)] += 1;
            total += 1;
        }
        let denom = (total + bin_count as u64) as f64;
        for (p, c) in model.probabilities.iter_mut().zip(&counts) {
            *p = (*c as f64 + 1.0) / denom;
        }
        Ok(model)
    }

    /// Model with explicit bin probabilities, each capped at 1.
    pub fn from_probabilities(min: f64, max: f64, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() || !(min <= max) {
            return Err(Error::InvalidValue("need >= 1 bin and min <= max".into()));
        }
        if probabilities.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidValue("bin probabilities must be positive".into()));
        }
        Ok(DensityModel {
            min,
            max,
            probabilities: probabilities.into_iter().map(|p| p.min(1.0)).collect(),
        })
    }

    pub fn bin_count(&self) -> usize {
        self.probabilities.len()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.min, self.max)
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Bin holding `v`; values outside the support clamp to the edge bins and
    /// a zero-width support maps everything to bin 0.
    #[inline]
    pub fn bin(&self, v: f64) -> usize {
        let span = self.max - self.min;
        if !(span > 0.0) {
            return 0;
        }
        let pos = (v - self.min) / span * self.bin_count() as f64;
        if pos <= 0.0 {
            0
        } else {
            (pos as usize).min(self.bin_count() - 1)
        }
    }

    #[inline]
    pub fn probability(&self, v: f64) -> f64 {
        self.probabilities[self.bin(v)]
    }
}
