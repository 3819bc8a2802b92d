use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::Label;

/// Counts with `Slip` as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn count(predictions: &[Label], labels: &[Label]) -> Self {
        let mut c = Confusion::default();
        for (p, l) in predictions.iter().zip(labels) {
            match (p, l) {
                (Label::Slip, Label::Slip) => c.tp += 1,
                (Label::Slip, Label::Stable) => c.fp += 1,
                (Label::Stable, Label::Slip) => c.fn_ += 1,
                (Label::Stable, Label::Stable) => c.tn += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// The same counts with the stable class treated as positive.
    fn flipped(&self) -> Self {
        Confusion {
            tp: self.tn,
            fp: self.fn_,
            fn_: self.fp,
            tn: self.tp,
        }
    }

    /// `(precision, recall, f1)` for the positive class.
    ///
    /// With nothing predicted positive, precision is 1 when there are also
    /// no actual positives and 0 otherwise. Recall with no actual positives
    /// follows the same rule mirrored: 1 when nothing was predicted positive.
    fn prf(&self) -> (f64, f64, f64) {
        let precision = if self.tp + self.fp > 0 {
            self.tp as f64 / (self.tp + self.fp) as f64
        } else if self.tp + self.fn_ == 0 {
            1.0
        } else {
            0.0
        };
        let recall = if self.tp + self.fn_ > 0 {
            self.tp as f64 / (self.tp + self.fn_) as f64
        } else if self.fp == 0 {
            1.0
        } else {
            0.0
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        (precision, recall, f1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Averaging {
    /// Scores for the slip class.
    #[default]
    Binary,
    /// Unweighted mean of per-class scores.
    Macro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

pub fn compute_metrics(predictions: &[Label], labels: &[Label]) -> Result<Metrics> {
    compute_metrics_with(predictions, labels, Averaging::Binary)
}

pub fn compute_metrics_with(
    predictions: &[Label],
    labels: &[Label],
    averaging: Averaging,
) -> Result<Metrics> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Dataset("metrics need at least one prediction".into()));
    }
    let c = Confusion::count(predictions, labels);
    let accuracy = (c.tp + c.tn) as f64 / c.total() as f64;
    let (precision, recall, f1) = match averaging {
        Averaging::Binary => c.prf(),
        Averaging::Macro => {
            let (p1, r1, f1) = c.prf();
            let (p0, r0, f0) = c.flipped().prf();
            ((p0 + p1) / 2.0, (r0 + r1) / 2.0, (f0 + f1) / 2.0)
        }
    };
    Ok(Metrics {
        accuracy,
        precision,
        recall,
        f1,
        confusion: c,
    })
}
