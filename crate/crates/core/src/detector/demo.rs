use serde::Serialize;

use super::{
    Detector, DetectorConfig, EpisodeLog, GripController, GripParams, GripReason, LogRecord,
};
use crate::classifiers::TrainedModel;
use crate::error::{Error, Result};
use crate::simkit::{GraspParams, GraspSim, GraspSimState, KvConfig};

/// Book-slide scenario: the object is held at `initial_force`, then an
/// external load ramps linearly from 0 to `peak_load` starting at
/// `load_start`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    /// s.
    pub duration: f64,
    /// N.
    pub initial_force: f64,
    /// s.
    pub load_start: f64,
    /// Ramp length, s.
    pub load_ramp: f64,
    /// N.
    pub peak_load: f64,
    pub seed: u64,
    /// Release request time, s.
    pub release_at: Option<f64>,
    /// Bound on the mean entropy rate over the final window, nats/s.
    pub rate_delta: f64,
    /// s.
    pub final_window: f64,
    pub grip: GripParams,
    pub detector: DetectorConfig,
    pub physics: GraspParams,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            duration: 10.0,
            initial_force: 5.0,
            load_start: 2.0,
            load_ramp: 1.0,
            peak_load: 4.0,
            seed: 42,
            release_at: None,
            rate_delta: 0.5,
            final_window: 2.0,
            grip: GripParams::default(),
            detector: DetectorConfig::default(),
            physics: GraspParams::default(),
        }
    }
}

impl DemoConfig {
    pub fn from_kv(text: &str) -> Result<Self> {
        let mut c = KvConfig::parse(text)?;
        let mut cfg = Self::default();
        c.set("duration", &mut cfg.duration)?;
        c.set("initial_force", &mut cfg.initial_force)?;
        c.set("load_start", &mut cfg.load_start)?;
        c.set("load_ramp", &mut cfg.load_ramp)?;
        c.set("peak_load", &mut cfg.peak_load)?;
        c.set("seed", &mut cfg.seed)?;
        cfg.release_at = c.take("release_at")?;
        c.set("rate_delta", &mut cfg.rate_delta)?;
        c.set("final_window", &mut cfg.final_window)?;
        c.set("delta_f", &mut cfg.grip.delta_f)?;
        c.set("f_min", &mut cfg.grip.f_min)?;
        c.set("f_max", &mut cfg.grip.f_max)?;
        c.set("hold_window", &mut cfg.grip.hold_window)?;
        c.set("debounce", &mut cfg.detector.debounce)?;
        c.set("contact_threshold", &mut cfg.detector.contact_threshold)?;
        c.set("mu", &mut cfg.physics.mu)?;
        c.set("tau", &mut cfg.physics.tau)?;
        c.set("slip_gain", &mut cfg.physics.slip_gain)?;
        c.set("noise", &mut cfg.physics.noise_sigma)?;
        c.set("frequency", &mut cfg.physics.frequency)?;
        cfg.detector.frequency = cfg.physics.frequency;
        c.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.grip.validate()?;
        self.detector.validate()?;
        self.physics.validate()?;
        let ok = self.duration > 0.0
            && self.load_start >= 0.0
            && self.load_ramp >= 0.0
            && self.peak_load >= 0.0
            && self.rate_delta > 0.0
            && self.final_window > 0.0
            && self.final_window <= self.duration
            && (self.detector.frequency - self.physics.frequency).abs() < 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid demo configuration {self:?}")))
        }
    }

    /// External tangential load at time `t`, N.
    pub fn load_at(&self, t: f64) -> f64 {
        if t <= self.load_start {
            0.0
        } else if self.load_ramp == 0.0 || t >= self.load_start + self.load_ramp {
            self.peak_load
        } else {
            self.peak_load * (t - self.load_start) / self.load_ramp
        }
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.physics.frequency).round() as usize
    }
}

/// Grasp stage annotation for one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Stage {
    /// No ground-truth slip yet.
    StaticGrasp,
    /// The object slides but the controller has not reacted.
    IncipientSlip,
    /// Tightening, or within one hold window of slip activity.
    Slip,
    /// A full hold window without slip or slip flags.
    StableGrasp,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [
        Stage::StaticGrasp,
        Stage::IncipientSlip,
        Stage::Slip,
        Stage::StableGrasp,
    ];

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::StaticGrasp => "1_STATIC_GRASP",
            Stage::IncipientSlip => "2_INCIPIENT_SLIP",
            Stage::Slip => "3_SLIP",
            Stage::StableGrasp => "4_STABLE_GRASP",
        }
    }

    pub fn parse_label(s: &str) -> Option<Stage> {
        Stage::ORDER.into_iter().find(|st| st.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageSpan {
    pub stage: Stage,
    pub start_t: f64,
    pub end_t: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseReport {
    pub spans: Vec<StageSpan>,
    /// Stages 1 to 4 each appear as exactly one contiguous span, in order.
    pub ordered_once: bool,
    pub initial_force: f64,
    pub final_force: f64,
    pub peak_force: f64,
    pub final_window_flags: usize,
    /// Mean entropy rate over the final window, nats/s.
    pub final_window_rate: f64,
    pub final_window_max_abs_rate: f64,
    pub rate_delta: f64,
    /// Mean entropy over the static-grasp frames.
    pub initial_entropy: f64,
    /// Mean entropy over the final window.
    pub final_entropy: f64,
    pub tighten_steps: usize,
}

impl PhaseReport {
    pub fn rate_settled(&self) -> bool {
        self.final_window_rate.abs() < self.rate_delta
    }

    /// Every demo requirement at once.
    pub fn reproduces_sequence(&self) -> bool {
        self.ordered_once
            && self.final_force > self.initial_force
            && self.final_window_flags == 0
            && self.rate_settled()
    }
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    pub log: EpisodeLog,
    pub truth: Vec<GraspSimState>,
    pub stages: Vec<Stage>,
    pub report: PhaseReport,
}

fn spans(stages: &[Stage], times: &[f64]) -> Vec<StageSpan> {
    let mut out: Vec<StageSpan> = Vec::new();
    for (&s, &t) in stages.iter().zip(times) {
        match out.last_mut() {
            Some(span) if span.stage == s => {
                span.end_t = t;
                span.frames += 1;
            }
            _ => out.push(StageSpan { stage: s, start_t: t, end_t: t, frames: 1 }),
        }
    }
    out
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// Runs detector, controller and grasp physics in closed loop.
pub fn run_demo(model: &TrainedModel, cfg: &DemoConfig) -> Result<DemoRun> {
    cfg.validate()?;
    let mut sim = GraspSim::new(cfg.physics, cfg.initial_force, cfg.seed)?;
    let mut detector = Detector::new(model.clone(), cfg.detector)?.with_reference(sim.reference())?;
    let mut controller = GripController::new(cfg.grip, cfg.initial_force)?;
    let hold = cfg.grip.hold_window;

    let mut log = EpisodeLog::default();
    let mut truth = Vec::with_capacity(cfg.frame_count() + 1);
    let mut stages = Vec::with_capacity(cfg.frame_count() + 1);
    let mut seen_slip = false;
    let mut tightened = false;
    let mut tighten_steps = 0;
    let mut last_activity: Option<usize> = None;

    let mut markers = sim.markers();
    let mut state = *sim.state();
    for k in 0..=cfg.frame_count() {
        if k > 0 {
            let t = k as f64 / cfg.physics.frequency;
            let grip = controller.command().target_force;
            (state, markers) = sim.step(grip, cfg.load_at(t))?;
        }
        let out = detector.ingest_frame(&markers)?;
        if cfg.release_at.is_some_and(|r| out.t >= r) && !controller.is_releasing() {
            controller.request_release();
        }
        let cmd = controller.step(&out)?;
        if cmd.reason == GripReason::Tighten && out.slip {
            tightened = true;
            tighten_steps += 1;
        }
        let gt = sim.is_slipping();
        seen_slip |= gt;
        if gt || out.slip {
            last_activity = Some(k);
        }
        let stage = if !seen_slip {
            Stage::StaticGrasp
        } else if !tightened {
            Stage::IncipientSlip
        } else if last_activity.is_some_and(|a| k - a < hold) {
            Stage::Slip
        } else {
            Stage::StableGrasp
        };
        log.push(LogRecord {
            t: out.t,
            vx: out.features.vx,
            vy: out.features.vy,
            entropy: out.features.entropy,
            entropy_rate: out.features.entropy_rate,
            slip: out.slip,
            score: out.score,
            force_cmd: Some(cmd.target_force),
            phase: stage.as_str().to_string(),
            latency_ms: out.latency_ms,
        });
        truth.push(state);
        stages.push(stage);
    }

    let times: Vec<f64> = log.records.iter().map(|r| r.t).collect();
    let spans = spans(&stages, &times);
    let ordered_once = spans.len() == 4
        && spans.iter().zip(Stage::ORDER).all(|(s, want)| s.stage == want);
    let window_start = cfg.duration - cfg.final_window;
    let final_recs: Vec<&LogRecord> =
        log.records.iter().filter(|r| r.t > window_start + 1e-9).collect();
    let forces = log.records.iter().filter_map(|r| r.force_cmd);
    let report = PhaseReport {
        ordered_once,
        initial_force: cfg.initial_force,
        final_force: controller.command().target_force,
        peak_force: forces.fold(cfg.initial_force, f64::max),
        final_window_flags: final_recs.iter().filter(|r| r.slip).count(),
        final_window_rate: mean(final_recs.iter().map(|r| r.entropy_rate)),
        final_window_max_abs_rate: final_recs
            .iter()
            .map(|r| r.entropy_rate.abs())
            .fold(0.0, f64::max),
        rate_delta: cfg.rate_delta,
        initial_entropy: mean(
            log.records
                .iter()
                .zip(&stages)
                .skip(1)
                .filter(|(_, s)| **s == Stage::StaticGrasp)
                .map(|(r, _)| r.entropy),
        ),
        final_entropy: mean(final_recs.iter().map(|r| r.entropy)),
        tighten_steps,
        spans,
    };
    Ok(DemoRun { log, truth, stages, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::fixtures::rf_all;

    #[test]
    fn default_book_slide_reproduces_the_four_stages() {
        let run = run_demo(rf_all(), &DemoConfig::default()).unwrap();
        let r = &run.report;
        assert!(r.ordered_once, "{:?}", r.spans);
        assert!(r.final_force > r.initial_force);
        assert_eq!(r.final_window_flags, 0);
        assert!(r.rate_settled(), "{}", r.final_window_rate);
        assert!(r.final_entropy > r.initial_entropy);
        assert!(r.reproduces_sequence());
        assert_eq!(run.log.len(), 251);
        let labels: Vec<Stage> =
            run.log.records.iter().map(|x| Stage::parse_label(&x.phase).unwrap()).collect();
        assert_eq!(labels, run.stages);
    }

    #[test]
    fn zero_load_stays_static() {
        let cfg = DemoConfig { peak_load: 0.0, ..Default::default() };
        let run = run_demo(rf_all(), &cfg).unwrap();
        assert!(run.stages.iter().all(|s| *s == Stage::StaticGrasp));
        assert!(run.log.records.iter().all(|r| r.force_cmd == Some(5.0) && !r.slip));
    }

    #[test]
    fn slow_ramp_settles_at_the_coulomb_step() {
        for (peak, mu) in [(4.0, 0.5), (5.2, 0.6), (2.7, 0.4)] {
            let mut cfg = DemoConfig { peak_load: peak, load_ramp: 6.0, duration: 14.0, ..Default::default() };
            cfg.physics.mu = mu;
            let run = run_demo(rf_all(), &cfg).unwrap();
            let d = cfg.grip.delta_f;
            let want = (peak / mu / d).ceil() * d;
            let got = run.report.final_force;
            assert!((got - want).abs() <= d + 1e-9, "T {peak} mu {mu}: {got} vs {want}");
            assert!(got >= peak / mu);
        }
    }

    #[test]
    fn release_ramps_down() {
        let cfg = DemoConfig { peak_load: 0.0, release_at: Some(6.0), ..Default::default() };
        let run = run_demo(rf_all(), &cfg).unwrap();
        let last = run.log.records.last().unwrap();
        assert_eq!(last.force_cmd, Some(cfg.grip.f_min));
    }

    #[test]
    fn saturation_is_a_grasp_failure() {
        let mut cfg = DemoConfig { peak_load: 12.0, ..Default::default() };
        cfg.grip.f_max = 8.0;
        assert!(matches!(run_demo(rf_all(), &cfg), Err(Error::GraspFailure { .. })));
    }

    #[test]
    fn config_parsing() {
        let cfg = DemoConfig::from_kv("duration = 6\npeak_load = 3\nmu = 0.6\nrelease_at = 5\ndebounce = 1").unwrap();
        assert_eq!(cfg.duration, 6.0);
        assert_eq!(cfg.physics.mu, 0.6);
        assert_eq!(cfg.release_at, Some(5.0));
        assert_eq!(cfg.detector.debounce, 1);
        assert_eq!(cfg.load_at(1.0), 0.0);
        assert_eq!(cfg.load_at(2.5), 1.5);
        assert_eq!(cfg.load_at(9.0), 3.0);
        assert!(DemoConfig::from_kv("wobble = 1").is_err());
        assert!(DemoConfig::from_kv("final_window = 30").is_err());
    }
}
