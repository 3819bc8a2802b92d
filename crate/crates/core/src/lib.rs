//! Slip detection from optical-tactile marker fields.
//!
//! The crate is organised as a pipeline:
//!
//! - [`markerflow`] turns tactile frames (or pre-tracked marker streams) into
//!   per-marker displacement fields and mean marker velocities.
//! - [`features`] computes the entropy of the displacement-magnitude
//!   histogram, its rate of change, and assembles feature vectors.
//! - [`classifiers`] holds logistic regression, an RBF-kernel SVM, k-nearest
//!   neighbours and a random forest, plus cross-validation and metrics.
//! - [`simkit`] generates labelled synthetic grasp episodes and simulates
//!   Coulomb stick-slip grasp physics.
//! - [`detector`] runs the streaming detector and the grip-force controller.

pub mod classifiers;
pub mod detector;
pub mod error;
pub mod features;
pub mod markerflow;
pub mod simkit;

pub use classifiers::{
    compute_metrics, FeatureSet, LabeledDataset, Metrics, ModelKind, Prediction, TrainedModel,
};
pub use detector::{Detector, DetectorConfig, DetectorOutput, EpisodeLog, GripCommand};
pub use error::{Error, Result};
pub use features::{FeatureVector, HistogramSpec, Label};
pub use markerflow::{DisplacementField, GrayFrame, MarkerSet, Point};
pub use simkit::{Episode, Scenario, ScenarioKind};

/// Default tactile sensor sampling rate in Hz.
pub const DEFAULT_FREQUENCY: f64 = 25.0;
