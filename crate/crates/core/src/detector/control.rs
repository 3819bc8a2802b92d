use serde::{Deserialize, Serialize};

use super::DetectorOutput;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GripReason {
    Hold,
    Tighten,
    Release,
}

impl GripReason {
    pub fn as_str(self) -> &'static str {
        match self {
            GripReason::Hold => "HOLD",
            GripReason::Tighten => "TIGHTEN",
            GripReason::Release => "RELEASE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripParams {
    /// Force step per slip cycle, N.
    pub delta_f: f64,
    pub f_min: f64,
    pub f_max: f64,
    /// Quiet frames before the grip is reported as held.
    pub hold_window: usize,
    /// Jaw opening at zero force, mm.
    pub open_distance_mm: f64,
    /// Jaw closure per newton, mm/N.
    pub mm_per_newton: f64,
}

impl Default for GripParams {
    fn default() -> Self {
        Self {
            delta_f: 0.5,
            f_min: 1.0,
            f_max: 15.0,
            hold_window: 12,
            open_distance_mm: 50.0,
            mm_per_newton: 1.0,
        }
    }
}

impl GripParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta_f > 0.0
            && self.f_min >= 0.0
            && self.f_max >= self.f_min
            && self.f_max.is_finite()
            && self.hold_window > 0
            && self.mm_per_newton >= 0.0
            && self.open_distance_mm >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid grip parameters {self:?}")))
        }
    }

    /// Linear gripper-distance proxy for a force, floored at closed jaws.
    pub fn distance_for(&self, force: f64) -> f64 {
        (self.open_distance_mm - self.mm_per_newton * force).max(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripCommand {
    /// N, always within `[f_min, f_max]`.
    pub target_force: f64,
    pub distance_mm: f64,
    pub reason: GripReason,
}

/// Slip-prevention force controller.
#[derive(Debug, Clone)]
pub struct GripController {
    params: GripParams,
    command: GripCommand,
    quiet: usize,
    releasing: bool,
}

impl GripController {
    pub fn new(params: GripParams, initial_force: f64) -> Result<Self> {
        params.validate()?;
        if !(initial_force >= params.f_min && initial_force <= params.f_max) {
            return Err(Error::InvalidParameter(format!(
                "initial force {initial_force} outside [{}, {}]",
                params.f_min, params.f_max
            )));
        }
        Ok(Self {
            command: GripCommand {
                target_force: initial_force,
                distance_mm: params.distance_for(initial_force),
                reason: GripReason::Hold,
            },
            params,
            quiet: 0,
            releasing: false,
        })
    }

    pub fn params(&self) -> &GripParams {
        &self.params
    }

    pub fn command(&self) -> GripCommand {
        self.command
    }

    pub fn is_releasing(&self) -> bool {
        self.releasing
    }

    /// From now on the force ramps down to `f_min`, ignoring slip.
    pub fn request_release(&mut self) {
        self.releasing = true;
    }

    pub fn step(&mut self, output: &DetectorOutput) -> Result<GripCommand> {
        self.step_flag(output.slip)
    }

    pub fn step_flag(&mut self, slip: bool) -> Result<GripCommand> {
        let p = self.params;
        let force = self.command.target_force;
        let (force, reason) = if self.releasing {
            ((force - p.delta_f).max(p.f_min), GripReason::Release)
        } else if slip {
            if force >= p.f_max {
                return Err(Error::GraspFailure { force });
            }
            self.quiet = 0;
            ((force + p.delta_f).min(p.f_max), GripReason::Tighten)
        } else {
            self.quiet = self.quiet.saturating_add(1);
            let reason = if self.quiet >= p.hold_window {
                GripReason::Hold
            } else {
                self.command.reason
            };
            (force, reason)
        };
        self.command = GripCommand {
            target_force: force,
            distance_mm: p.distance_for(force),
            reason,
        };
        Ok(self.command)
    }
}
