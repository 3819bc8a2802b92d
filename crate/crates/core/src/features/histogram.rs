use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markerflow::DisplacementField;

/// Uniform binning of displacement magnitudes over `[0, max]` px; values past
/// `max` saturate into the last bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramSpec {
    pub bins: usize,
    pub max: f64,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        Self { bins: 32, max: 30.0 }
    }
}

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "histogram needs at least 2 bins, got {}",
                self.bins
            )));
        }
        if !(self.max > 0.0 && self.max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "histogram range must be positive, got {}",
                self.max
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn bin_of(&self, magnitude: f64) -> usize {
        let b = (magnitude * self.bins as f64 / self.max).floor();
        if b >= 0.0 {
            (b as usize).min(self.bins - 1)
        } else {
            0
        }
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|k| self.max * k as f64 / self.bins as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

pub fn magnitude_histogram(field: &DisplacementField, spec: &HistogramSpec) -> Result<Histogram> {
    spec.validate()?;
    if field.is_empty() {
        return Err(Error::EmptyField);
    }
    let mut counts = vec![0u64; spec.bins];
    for m in field.magnitudes() {
        counts[spec.bin_of(m)] += 1;
    }
    Ok(Histogram {
        bin_edges: spec.edges(),
        counts,
    })
}
