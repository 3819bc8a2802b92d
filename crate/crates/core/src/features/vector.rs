use serde::{Deserialize, Serialize};

use super::{entropy, entropy_rate, magnitude_histogram, HistogramSpec};
use crate::error::{Error, Result};
use crate::markerflow::{velocity_features, DisplacementField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Stable = 0,
    Slip = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Result<Self> {
        match v {
            0 => Ok(Label::Stable),
            1 => Ok(Label::Slip),
            other => Err(Error::Dataset(format!("label must be 0 or 1, got {other}"))),
        }
    }

    pub fn is_slip(self) -> bool {
        self == Label::Slip
    }
}

impl From<bool> for Label {
    fn from(slip: bool) -> Self {
        if slip {
            Label::Slip
        } else {
            Label::Stable
        }
    }
}

/// One time step of slip features. `label` is present only in training data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub entropy: f64,
    pub entropy_rate: f64,
    pub label: Option<Label>,
}

impl FeatureVector {
    pub fn zero(t: f64) -> Self {
        Self {
            t,
            vx: 0.0,
            vy: 0.0,
            entropy: 0.0,
            entropy_rate: 0.0,
            label: None,
        }
    }

    /// `[vx, vy, entropy, entropy_rate]`
    pub fn values(&self) -> [f64; 4] {
        [self.vx, self.vy, self.entropy, self.entropy_rate]
    }
}

/// Composes mean velocities, histogram entropy and entropy rate for
/// `field_t`, given the previous field and its entropy.
pub fn build_feature_vector(
    field_t: &DisplacementField,
    field_prev: &DisplacementField,
    e_prev: f64,
    frequency: f64,
    spec: &HistogramSpec,
    label: Option<Label>,
) -> Result<FeatureVector> {
    let v = velocity_features(field_t, field_prev, frequency)?;
    let e = entropy(&magnitude_histogram(field_t, spec)?)?;
    Ok(FeatureVector {
        t: field_t.timestamp,
        vx: v.vx,
        vy: v.vy,
        entropy: e,
        entropy_rate: entropy_rate(e, e_prev, frequency),
        label,
    })
}

/// Threads the previous field and entropy through a sequence of fields.
/// The first field only primes the state and yields no vector.
#[derive(Debug, Clone)]
pub struct FeatureStream {
    frequency: f64,
    spec: HistogramSpec,
    prev: Option<(DisplacementField, f64)>,
}

impl FeatureStream {
    pub fn new(frequency: f64, spec: HistogramSpec) -> Result<Self> {
        spec.validate()?;
        if !(frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency must be positive, got {frequency}"
            )));
        }
        Ok(Self {
            frequency,
            spec,
            prev: None,
        })
    }

    /// Starts from an explicit previous state.
    pub fn prime(&mut self, field: DisplacementField) -> Result<f64> {
        let e = entropy(&magnitude_histogram(&field, &self.spec)?)?;
        self.prev = Some((field, e));
        Ok(e)
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }

    pub fn previous_entropy(&self) -> Option<f64> {
        self.prev.as_ref().map(|p| p.1)
    }

    pub fn push(
        &mut self,
        field: DisplacementField,
        label: Option<Label>,
    ) -> Result<Option<FeatureVector>> {
        match self.prev.take() {
            None => {
                self.prime(field)?;
                Ok(None)
            }
            Some((prev, e_prev)) => {
                let fv =
                    build_feature_vector(&field, &prev, e_prev, self.frequency, &self.spec, label)?;
                self.prev = Some((field, fv.entropy));
                Ok(Some(fv))
            }
        }
    }
}
