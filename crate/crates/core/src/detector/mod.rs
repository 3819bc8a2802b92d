//! Streaming slip detector, slip-prevention grip controller and the
//! closed-loop book-slide demo.

mod control;
mod demo;
mod log;
mod stream;

pub use control::{GripCommand, GripController, GripParams, GripReason};
pub use demo::{run_demo, DemoConfig, DemoRun, PhaseReport, Stage, StageSpan};
pub use log::{EpisodeLog, LatencyStats, LogRecord, EPISODE_LOG_HEADER};
pub use stream::{Detector, DetectorConfig, DetectorOutput, Phase};

#[cfg(test)]
pub(crate) mod fixtures {
    use std::sync::OnceLock;

    use crate::classifiers::{fit, FeatureSet, Hyperparams, LabeledDataset, ModelKind, TrainedModel};
    use crate::simkit::{generate_dataset, DatasetConfig};

    /// Random forest on all features of the default synthetic dataset.
    pub fn rf_all() -> &'static TrainedModel {
        static MODEL: OnceLock<TrainedModel> = OnceLock::new();
        MODEL.get_or_init(|| {
            let (rows, _) = generate_dataset(&DatasetConfig::default()).unwrap();
            let data = LabeledDataset::from_features(&rows, FeatureSet::All).unwrap();
            fit(ModelKind::Rf, &data, &Hyperparams::new(), 42).unwrap()
        })
    }
}
