use std::collections::VecDeque;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classifiers::{FeatureSet, TrainedModel};
use crate::error::{Error, Result};
use crate::features::{FeatureStream, FeatureVector, HistogramSpec};
use crate::markerflow::{
    associate_markers, default_gate, displacement_field, mean_magnitude, Correspondence,
    DisplacementField, MarkerSet, Point,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Phase {
    NoContact,
    Grasped,
    Slipping,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::NoContact => "NO_CONTACT",
            Phase::Grasped => "GRASPED",
            Phase::Slipping => "SLIPPING",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub frequency: f64,
    pub histogram: HistogramSpec,
    /// Consecutive positive frames needed before `slip` is raised. 1 reports
    /// raw model labels.
    pub debounce: usize,
    /// Mean |D| in px below which the gel counts as untouched.
    pub contact_threshold: f64,
    /// Frames averaged for the contact test.
    pub contact_window: usize,
    /// Fewest markers accepted as a reference frame.
    pub min_markers: usize,
    /// Largest marker-count change handled by re-association; anything more
    /// recalibrates.
    pub count_tolerance: usize,
    /// Replace the reference once the gel has sat at rest for a while.
    pub recalibrate: bool,
    /// Mean |D| in px below which a frame counts as at rest.
    pub rest_threshold: f64,
    /// Consecutive rest frames that trigger recalibration.
    pub rest_frames: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            frequency: crate::DEFAULT_FREQUENCY,
            histogram: HistogramSpec::default(),
            debounce: 2,
            contact_threshold: 0.3,
            contact_window: 5,
            min_markers: 8,
            count_tolerance: 3,
            recalibrate: true,
            rest_threshold: 0.2,
            rest_frames: 25,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.histogram.validate()?;
        if !(self.frequency > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "frequency must be positive, got {}",
                self.frequency
            )));
        }
        if self.debounce == 0 || self.contact_window == 0 || self.rest_frames == 0 {
            return Err(Error::InvalidParameter(
                "debounce, contact_window and rest_frames must be at least 1".into(),
            ));
        }
        if !(self.contact_threshold >= 0.0 && self.rest_threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "contact_threshold and rest_threshold must be non-negative, got {} and {}",
                self.contact_threshold, self.rest_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorOutput {
    pub t: f64,
    /// Debounced decision.
    pub slip: bool,
    /// Model label before debouncing (false while out of contact).
    pub raw_slip: bool,
    pub score: f64,
    pub features: FeatureVector,
    pub latency_ms: f64,
    pub phase: Phase,
    /// This frame replaced the reference.
    pub recalibrated: bool,
}

/// Streaming slip detector. Frames must arrive in timestamp order.
#[derive(Debug, Clone)]
pub struct Detector {
    model: TrainedModel,
    set: FeatureSet,
    cfg: DetectorConfig,
    stream: FeatureStream,
    reference: Option<MarkerSet>,
    gate: f64,
    previous: Option<DisplacementField>,
    contact: VecDeque<f64>,
    at_rest: usize,
    positives: usize,
    last_t: Option<f64>,
    frames: u64,
    phase: Phase,
}

impl Detector {
    /// The first frame with at least `min_markers` markers becomes the
    /// reference.
    pub fn new(model: TrainedModel, cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        let set = model.feature_set().ok_or_else(|| {
            Error::Model(format!(
                "model features {:?} are neither the velocity nor the full feature set",
                model.feature_names
            ))
        })?;
        Ok(Self {
            model,
            set,
            stream: FeatureStream::new(cfg.frequency, cfg.histogram)?,
            cfg,
            reference: None,
            gate: f64::INFINITY,
            previous: None,
            contact: VecDeque::new(),
            at_rest: 0,
            positives: 0,
            last_t: None,
            frames: 0,
            phase: Phase::NoContact,
        })
    }

    /// Uses a known undeformed marker set as the reference.
    pub fn with_reference(mut self, reference: MarkerSet) -> Result<Self> {
        if reference.len() < self.cfg.min_markers.max(1) {
            return Err(Error::InvalidFrame(format!(
                "reference has {} markers, need {}",
                reference.len(),
                self.cfg.min_markers
            )));
        }
        self.gate = default_gate(&reference);
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn model(&self) -> &TrainedModel {
        &self.model
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn reference(&self) -> Option<&MarkerSet> {
        self.reference.as_ref()
    }

    pub fn previous_entropy(&self) -> Option<f64> {
        self.stream.previous_entropy()
    }

    fn reset_stream(&mut self) {
        self.stream.reset();
        self.previous = None;
        self.contact.clear();
        self.at_rest = 0;
        self.positives = 0;
    }

    /// Makes `markers` the reference and primes the stream with a zero field.
    fn adopt(&mut self, markers: &MarkerSet, start: Instant, recalibrated: bool) -> DetectorOutput {
        let t = markers.timestamp;
        self.reset_stream();
        self.phase = Phase::NoContact;
        if markers.len() < self.cfg.min_markers.max(1) {
            self.reference = None;
            return self.output(t, FeatureVector::zero(t), start, recalibrated);
        }
        self.gate = default_gate(markers);
        self.reference = Some(markers.clone());
        let field = DisplacementField::zeros(markers.len(), t);
        // A zero field always has zero entropy, so priming cannot fail.
        self.stream.prime(field.clone()).ok();
        self.previous = Some(field);
        self.contact.push_back(0.0);
        self.output(t, FeatureVector::zero(t), start, recalibrated)
    }

    fn correspondence(&self, reference: &MarkerSet, markers: &MarkerSet) -> Correspondence {
        if markers.len() == reference.len() {
            return Correspondence::identity(reference.len());
        }
        // Predict each reference marker at its last known displaced position.
        let estimate = match &self.previous {
            Some(prev) => MarkerSet::new(
                reference.timestamp,
                reference
                    .positions
                    .iter()
                    .enumerate()
                    .map(|(i, p)| Point::new(p.x + prev.dx[i], p.y + prev.dy[i]))
                    .collect(),
            ),
            None => reference.clone(),
        };
        associate_markers(&estimate, markers, Some(self.gate))
    }

    fn output(&self, t: f64, features: FeatureVector, start: Instant, recalibrated: bool) -> DetectorOutput {
        DetectorOutput {
            t,
            slip: false,
            raw_slip: false,
            score: 0.0,
            features,
            latency_ms: start.elapsed().as_secs_f64() * 1e3,
            phase: self.phase,
            recalibrated,
        }
    }

    pub fn ingest_frame(&mut self, markers: &MarkerSet) -> Result<DetectorOutput> {
        let start = Instant::now();
        let t = markers.timestamp;
        if !t.is_finite() {
            return Err(Error::InvalidFrame(format!("timestamp {t} is not finite")));
        }
        if let Some(last) = self.last_t {
            if t <= last {
                return Err(Error::InvalidFrame(format!(
                    "timestamp {t} does not follow {last}"
                )));
            }
        }
        self.last_t = Some(t);
        self.frames += 1;

        let reference = match self.reference.take() {
            Some(r) if r.len().abs_diff(markers.len()) <= self.cfg.count_tolerance => r,
            previous => {
                // First frame, or the marker count jumped: adopt this frame.
                return Ok(self.adopt(markers, start, previous.is_some()));
            }
        };
        let corr = self.correspondence(&reference, markers);
        let field = displacement_field(&reference, markers, &corr, self.previous.as_ref());
        self.reference = Some(reference);
        let field = field?;

        let magnitude = mean_magnitude(&field);
        self.at_rest = if magnitude < self.cfg.rest_threshold { self.at_rest + 1 } else { 0 };
        if self.cfg.recalibrate && self.at_rest >= self.cfg.rest_frames {
            return Ok(self.adopt(markers, start, true));
        }
        if self.contact.len() == self.cfg.contact_window {
            self.contact.pop_front();
        }
        self.contact.push_back(magnitude);
        let in_contact = self.contact.iter().sum::<f64>() / (self.contact.len() as f64)
            >= self.cfg.contact_threshold;

        self.previous = Some(field.clone());
        let (features, primed_only) = match self.stream.push(field, None)? {
            Some(fv) => (fv, false),
            None => {
                // Primed by this frame: no velocity or rate is available yet.
                let e = self.stream.previous_entropy().unwrap_or(0.0);
                (FeatureVector { entropy: e, ..FeatureVector::zero(t) }, true)
            }
        };

        if !in_contact || primed_only {
            self.positives = 0;
            self.phase = if in_contact { Phase::Grasped } else { Phase::NoContact };
            return Ok(self.output(t, features, start, false));
        }

        let pred = self.model.predict(&self.set.select(&features))?;
        let raw = pred.label.is_slip();
        self.positives = if raw { self.positives + 1 } else { 0 };
        let slip = self.positives >= self.cfg.debounce;
        self.phase = if slip { Phase::Slipping } else { Phase::Grasped };
        let mut out = self.output(t, features, start, false);
        out.slip = slip;
        out.raw_slip = raw;
        out.score = pred.score;
        out.latency_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifiers::{fit, Hyperparams, LabeledDataset, ModelKind};
    use crate::detector::fixtures::rf_all;
    use crate::detector::{GripController, GripParams, GripReason};
    use crate::features::Label;
    use crate::simkit::{generate_episode, GelGrid, Scenario, ScenarioKind};
    use proptest::prelude::*;

    fn replay(det: &mut Detector, frames: &[MarkerSet]) -> Vec<DetectorOutput> {
        frames.iter().map(|f| det.ingest_frame(f).unwrap()).collect()
    }

    fn pressed(t: f64, shift: f64) -> MarkerSet {
        // Radially indented grid, optionally shifted along x.
        let rest = GelGrid::default().rest(t);
        let c = rest.centroid().unwrap();
        let positions = rest
            .positions
            .iter()
            .map(|p| {
                let (dx, dy) = (p.x - c.x, p.y - c.y);
                let r = dx.hypot(dy).max(1.0);
                let k = 2.0 * (-r / 120.0).exp();
                Point::new(p.x + k * dx / r + shift, p.y + k * dy / r)
            })
            .collect();
        MarkerSet::new(t, positions)
    }

    /// Logistic model on velocity only that fires iff vx > 5 px/s.
    fn vx_model() -> TrainedModel {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..200 {
            let vx = -40.0 + 0.4 * i as f64;
            rows.push(vec![vx, 0.1 * (i % 7) as f64]);
            labels.push(Label::from(vx > 5.0));
        }
        let data = LabeledDataset::new(FeatureSet::Velocity.names(), rows, labels).unwrap();
        fit(ModelKind::Lr, &data, &Hyperparams::new(), 0).unwrap()
    }

    #[test]
    fn identical_frames_never_slip() {
        let model = rf_all();
        let zero = FeatureSet::All.select(&FeatureVector::zero(0.0));
        assert_eq!(model.predict(&zero).unwrap().label, Label::Stable);
        let frames: Vec<MarkerSet> = (0..60).map(|k| pressed(k as f64 * 0.04, 0.0)).collect();
        for threshold in [0.3, 0.0] {
            let cfg = DetectorConfig { contact_threshold: threshold, ..Default::default() };
            let mut det = Detector::new(model.clone(), cfg).unwrap();
            let outs = replay(&mut det, &frames);
            assert!(outs.iter().all(|o| !o.slip && !o.raw_slip));
            assert!(outs.iter().all(|o| o.features.values() == [0.0; 4]));
            let want = if threshold > 0.0 { Phase::NoContact } else { Phase::Grasped };
            assert_eq!(outs.last().unwrap().phase, want);
        }
    }

    #[test]
    fn trans_y_replay_flags_within_three_frames() {
        let model = rf_all();
        for seed in 0..20 {
            let ep = generate_episode(&Scenario::new(ScenarioKind::TransSlipY), 9_000 + seed).unwrap();
            let first = ep.first_slip().unwrap();
            let mut det = Detector::new(model.clone(), DetectorConfig::default())
                .unwrap()
                .with_reference(ep.reference.clone())
                .unwrap();
            let outs = replay(&mut det, &ep.frames);
            let flagged = outs.iter().position(|o| o.slip).expect("slip detected");
            assert!(
                flagged >= first && flagged - first <= 3,
                "seed {seed}: truth {first}, flagged {flagged}"
            );
        }
    }

    #[test]
    fn accel_replay_raises_no_flags() {
        let model = rf_all();
        for seed in 0..20 {
            let s = Scenario::new(ScenarioKind::AccelNoSlip).with_noise(0.0);
            let ep = generate_episode(&s, 500 + seed).unwrap();
            let mut det = Detector::new(model.clone(), DetectorConfig::default())
                .unwrap()
                .with_reference(ep.reference.clone())
                .unwrap();
            let outs = replay(&mut det, &ep.frames);
            assert!(outs.iter().all(|o| !o.slip && o.features.entropy == 0.0), "seed {seed}");
        }
    }

    #[test]
    fn replay_is_deterministic() {
        let ep = generate_episode(&Scenario::new(ScenarioKind::RotSlip), 77).unwrap();
        let run = || {
            let mut det = Detector::new(rf_all().clone(), DetectorConfig::default())
                .unwrap()
                .with_reference(ep.reference.clone())
                .unwrap();
            replay(&mut det, &ep.frames)
                .into_iter()
                .map(|o| DetectorOutput { latency_ms: 0.0, ..o })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn timestamps_must_increase() {
        let mut det = Detector::new(vx_model(), DetectorConfig::default()).unwrap();
        det.ingest_frame(&pressed(0.04, 0.0)).unwrap();
        assert!(matches!(det.ingest_frame(&pressed(0.04, 0.0)), Err(Error::InvalidFrame(_))));
        assert!(matches!(det.ingest_frame(&pressed(0.0, 0.0)), Err(Error::InvalidFrame(_))));
        assert!(det.ingest_frame(&pressed(f64::NAN, 0.0)).is_err());
        assert!(det.ingest_frame(&pressed(0.08, 0.0)).is_ok());
    }

    #[test]
    fn large_count_change_recalibrates() {
        let reference = GelGrid::default().rest(0.0);
        let mut det = Detector::new(vx_model(), DetectorConfig { contact_threshold: 0.0, ..Default::default() })
            .unwrap()
            .with_reference(reference)
            .unwrap();
        for k in 0..5 {
            assert!(!det.ingest_frame(&pressed(k as f64 * 0.04, 0.0)).unwrap().recalibrated);
        }
        let mut sparse = pressed(0.2, 0.0);
        sparse.positions.truncate(50);
        let out = det.ingest_frame(&sparse).unwrap();
        assert!(out.recalibrated && !out.slip);
        assert_eq!(out.phase, Phase::NoContact);
        assert_eq!(det.reference().unwrap().len(), 50);
        let mut next = pressed(0.24, 0.0);
        next.positions.truncate(50);
        let out = det.ingest_frame(&next).unwrap();
        assert!(!out.recalibrated);
        assert_eq!(out.features.values(), [0.0; 4]);
    }

    #[test]
    fn resting_gel_recalibrates_after_window() {
        let reference = GelGrid::default().rest(0.0);
        let run = |recalibrate: bool| {
            let cfg = DetectorConfig { recalibrate, ..Default::default() };
            let mut det = Detector::new(vx_model(), cfg).unwrap().with_reference(reference.clone()).unwrap();
            // A shift of 0.1 px keeps mean |D| under the rest threshold.
            (1..=60)
                .map(|k| {
                    let f = MarkerSet::new(k as f64 * 0.04, reference.translated(0.1, 0.0).positions);
                    det.ingest_frame(&f).unwrap()
                })
                .map(|o| o.recalibrated)
                .collect::<Vec<_>>()
        };
        let hits: Vec<usize> = run(true).iter().enumerate().filter(|(_, &r)| r).map(|(i, _)| i + 1).collect();
        assert_eq!(hits, [25, 50]);
        assert!(run(false).iter().all(|&r| !r));
    }

    #[test]
    fn small_count_change_is_reassociated() {
        // Two markers drop out; the rest keep their identity and the lost
        // ones carry their previous displacement.
        let cfg = DetectorConfig { contact_threshold: 0.0, ..Default::default() };
        let reference = GelGrid::default().rest(0.0);
        let full = Detector::new(vx_model(), cfg).unwrap().with_reference(reference.clone()).unwrap();
        let (mut a, mut b) = (full.clone(), full);
        for k in 0..4 {
            let f = pressed(k as f64 * 0.04, 0.0);
            a.ingest_frame(&f).unwrap();
            b.ingest_frame(&f).unwrap();
        }
        let f = pressed(0.16, 0.0);
        let mut thinned = f.clone();
        thinned.positions.remove(40);
        thinned.positions.remove(3);
        let x = a.ingest_frame(&f).unwrap();
        let y = b.ingest_frame(&thinned).unwrap();
        assert!(!y.recalibrated);
        assert_eq!(x.features.values(), y.features.values());
    }

    #[test]
    fn isolated_positive_never_tightens() {
        let cfg = DetectorConfig { contact_threshold: 0.0, ..Default::default() };
        let mut det = Detector::new(vx_model(), cfg).unwrap();
        let mut ctl = GripController::new(GripParams::default(), 5.0).unwrap();
        let shifts = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let mut raw = Vec::new();
        let mut pos = 0.0;
        for (k, s) in shifts.iter().enumerate() {
            pos += s;
            let out = det.ingest_frame(&pressed(k as f64 * 0.04, pos)).unwrap();
            raw.push(out.raw_slip);
            let cmd = ctl.step(&out).unwrap();
            if k < 8 {
                assert_ne!(cmd.reason, GripReason::Tighten, "frame {k}");
            }
        }
        assert!(raw[3] && !raw[4], "{raw:?}");
        assert!(raw[7] && raw[8]);
        assert_eq!(ctl.command().target_force, 7.0);
    }

    proptest! {
        #[test]
        fn debounce_suppresses_isolated_positives(
            pattern in proptest::collection::vec(any::<bool>(), 2..40),
            debounce in 2usize..4,
        ) {
            // Make every positive frame isolated.
            let mut fire = pattern;
            for i in 1..fire.len() {
                if fire[i - 1] {
                    fire[i] = false;
                }
            }
            let cfg = DetectorConfig { debounce, contact_threshold: 0.0, ..Default::default() };
            let mut det = Detector::new(vx_model(), cfg).unwrap();
            let mut ctl = GripController::new(GripParams::default(), 5.0).unwrap();
            let mut pos = 0.0;
            det.ingest_frame(&pressed(0.0, 0.0)).unwrap();
            for (k, f) in fire.iter().enumerate() {
                if *f {
                    pos += 1.0;
                }
                let out = det.ingest_frame(&pressed((k + 1) as f64 * 0.04, pos)).unwrap();
                prop_assert!(!out.slip);
                prop_assert_ne!(ctl.step(&out).unwrap().reason, GripReason::Tighten);
            }
        }
    }

    #[test]
    fn latency_is_recorded() {
        let mut det = Detector::new(rf_all().clone(), DetectorConfig::default()).unwrap();
        let outs = replay(&mut det, &(0..10).map(|k| pressed(k as f64 * 0.04, 0.0)).collect::<Vec<_>>());
        assert!(outs.iter().all(|o| o.latency_ms >= 0.0 && o.latency_ms.is_finite()));
    }

    #[test]
    fn rejects_foreign_feature_layouts() {
        let data = LabeledDataset::new(
            vec!["a".into()],
            vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]],
            vec![Label::Stable, Label::Stable, Label::Slip, Label::Slip],
        )
        .unwrap();
        let m = fit(ModelKind::Knn, &data, &Hyperparams::new(), 0).unwrap();
        assert!(Detector::new(m, DetectorConfig::default()).is_err());
        let bad = DetectorConfig { debounce: 0, ..Default::default() };
        assert!(Detector::new(vx_model(), bad).is_err());
    }
}
