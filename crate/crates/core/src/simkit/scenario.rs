use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScenarioKind {
    NoContact,
    StableGrasp,
    TransSlipX,
    TransSlipY,
    RotSlip,
    AccelNoSlip,
    ContactLoss,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 7] = [
        ScenarioKind::NoContact,
        ScenarioKind::StableGrasp,
        ScenarioKind::TransSlipX,
        ScenarioKind::TransSlipY,
        ScenarioKind::RotSlip,
        ScenarioKind::AccelNoSlip,
        ScenarioKind::ContactLoss,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::NoContact => "NO_CONTACT",
            ScenarioKind::StableGrasp => "STABLE_GRASP",
            ScenarioKind::TransSlipX => "TRANS_SLIP_X",
            ScenarioKind::TransSlipY => "TRANS_SLIP_Y",
            ScenarioKind::RotSlip => "ROT_SLIP",
            ScenarioKind::AccelNoSlip => "ACCEL_NO_SLIP",
            ScenarioKind::ContactLoss => "CONTACT_LOSS",
        }
    }

    /// Whether episodes of this kind contain slip frames.
    pub fn has_slip(self) -> bool {
        matches!(
            self,
            ScenarioKind::TransSlipX | ScenarioKind::TransSlipY | ScenarioKind::RotSlip
        )
    }
}

impl std::fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown scenario kind `{s}`")))
    }
}

/// One episode family with its object parameters.
///
/// `mass` scales the inertial shear of `ACCEL_NO_SLIP`, `mu` sets how fast a
/// slipping object moves (slower for grippier surfaces) and `stiffness`
/// divides the indentation depth of the static contact field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Seconds.
    pub duration: f64,
    /// Per-coordinate marker position noise, px.
    pub noise_sigma: f64,
    /// kg.
    pub mass: f64,
    pub mu: f64,
    pub stiffness: f64,
    /// Hz.
    pub frequency: f64,
    /// Slip or twist direction: `Some(true)` for negative. `None` draws it
    /// from the episode seed.
    pub reverse: Option<bool>,
}

impl Scenario {
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            duration: 4.0,
            noise_sigma: 0.05,
            mass: 0.5,
            mu: 0.5,
            stiffness: 1.0,
            frequency: crate::DEFAULT_FREQUENCY,
            reverse: None,
        }
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }

    pub fn with_noise(mut self, sigma: f64) -> Self {
        self.noise_sigma = sigma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.mu > 0.0) {
            return bad(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be non-negative, got {}", self.noise_sigma));
        }
        if !(self.mass > 0.0) {
            return bad(format!("mass must be positive, got {}", self.mass));
        }
        if !(self.stiffness > 0.0) {
            return bad(format!("stiffness must be positive, got {}", self.stiffness));
        }
        if !(self.frequency > 0.0) {
            return bad(format!("frequency must be positive, got {}", self.frequency));
        }
        if self.frame_count() < 2 {
            return bad("an episode needs at least two frames".into());
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        (self.duration * self.frequency).round() as usize
    }
}
