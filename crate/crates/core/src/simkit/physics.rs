use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::episode::SLIP_EPSILON;
use super::patch::{ContactPatch, GelGrid};
use crate::error::{Error, Result};
use crate::markerflow::{MarkerSet, Point};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspParams {
    pub mu: f64,
    /// Grip actuation lag, s.
    pub tau: f64,
    /// Slip speed per newton of excess load, px/s/N.
    pub slip_gain: f64,
    /// px/s.
    pub max_slip_speed: f64,
    /// Uniform gel shear per newton of load carried by static friction, px/N.
    pub stick_shear: f64,
    /// Peak contact-field depth per newton of normal force, px/N.
    pub indentation: f64,
    /// Marker position noise, px.
    pub noise_sigma: f64,
    pub frequency: f64,
    /// Unit direction the load pulls the object along.
    pub load_axis: (f64, f64),
}

impl Default for GraspParams {
    fn default() -> Self {
        Self {
            mu: 0.5,
            tau: 0.08,
            slip_gain: 60.0,
            max_slip_speed: 15.0,
            stick_shear: 0.1,
            indentation: 0.6,
            noise_sigma: 0.02,
            frequency: crate::DEFAULT_FREQUENCY,
            load_axis: (0.0, 1.0),
        }
    }
}

impl GraspParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu > 0.0
            && self.tau >= 0.0
            && self.slip_gain > 0.0
            && self.max_slip_speed > 0.0
            && self.stick_shear >= 0.0
            && self.indentation >= 0.0
            && self.noise_sigma >= 0.0
            && self.frequency > 0.0
            && (self.load_axis.0.hypot(self.load_axis.1) - 1.0).abs() < 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid grasp parameters {self:?}")))
        }
    }

    /// Object speed in px/s above which a step counts as slipping.
    pub fn slip_threshold(&self) -> f64 {
        SLIP_EPSILON * self.frequency
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GraspSimState {
    /// s.
    pub time: f64,
    /// N.
    pub normal_force: f64,
    /// N.
    pub tangential_load: f64,
    /// Object speed relative to the gel, px/s.
    pub object_velocity: f64,
    /// N.
    pub grip_command: f64,
    /// Total object travel relative to the gel, px.
    pub travel: f64,
}

/// One Coulomb stick-slip step. The normal force follows the command with a
/// first-order lag; the object sticks while the load is within the friction
/// cone of the new normal force and otherwise slides at a speed proportional
/// to the excess load.
pub fn step_grasp_physics(
    state: &GraspSimState,
    params: &GraspParams,
    grip_cmd: f64,
    external_tangential: f64,
    dt: f64,
) -> Result<GraspSimState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !(grip_cmd >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "grip command must be non-negative, got {grip_cmd}"
        )));
    }
    let alpha = if params.tau > 0.0 { 1.0 - (-dt / params.tau).exp() } else { 1.0 };
    let normal = (state.normal_force + (grip_cmd - state.normal_force) * alpha).max(0.0);
    let load = external_tangential.abs();
    let limit = params.mu * normal;
    let velocity = if load <= limit {
        0.0
    } else {
        (params.slip_gain * (load - limit)).min(params.max_slip_speed)
    };
    Ok(GraspSimState {
        time: state.time + dt,
        normal_force: normal,
        tangential_load: load,
        object_velocity: velocity,
        grip_command: grip_cmd,
        travel: state.travel + velocity * dt,
    })
}

/// Stateful simulation producing a marker frame per step.
#[derive(Debug, Clone)]
pub struct GraspSim {
    params: GraspParams,
    grid: GelGrid,
    patch: ContactPatch,
    state: GraspSimState,
    shear: Vec<(f64, f64)>,
    frame: usize,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
}

impl GraspSim {
    /// Object already held at `initial_force` with no load.
    pub fn new(params: GraspParams, initial_force: f64, seed: u64) -> Result<Self> {
        params.validate()?;
        if !(initial_force >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "initial force must be non-negative, got {initial_force}"
            )));
        }
        let grid = GelGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let patch = ContactPatch::random(&grid, 15.0, &mut rng);
        let noise = (params.noise_sigma > 0.0)
            .then(|| Normal::new(0.0, params.noise_sigma).expect("validated sigma"));
        Ok(Self {
            params,
            shear: vec![(0.0, 0.0); grid.len()],
            grid,
            patch,
            state: GraspSimState {
                normal_force: initial_force,
                grip_command: initial_force,
                ..Default::default()
            },
            frame: 0,
            rng,
            noise,
        })
    }

    pub fn params(&self) -> &GraspParams {
        &self.params
    }

    pub fn state(&self) -> &GraspSimState {
        &self.state
    }

    /// Undeformed gel.
    pub fn reference(&self) -> MarkerSet {
        self.grid.rest(0.0)
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.params.frequency
    }

    pub fn is_slipping(&self) -> bool {
        self.state.object_velocity > self.params.slip_threshold()
    }

    /// Markers for the current state.
    pub fn markers(&mut self) -> MarkerSet {
        let p = &self.params;
        let s = &self.state;
        let depth = p.indentation * s.normal_force;
        let stick = p.stick_shear * s.tangential_load.min(p.mu * s.normal_force);
        let (ax, ay) = p.load_axis;
        let t = self.frame as f64 / p.frequency;
        let positions = self
            .grid
            .positions()
            .iter()
            .zip(&self.patch.unit_field)
            .zip(&self.shear)
            .map(|((q, &(ux, uy)), &(sx, sy))| {
                let (nx, ny) = match &self.noise {
                    Some(d) => (d.sample(&mut self.rng), d.sample(&mut self.rng)),
                    None => (0.0, 0.0),
                };
                Point::new(
                    q.x + ux * depth + stick * ax + sx + nx,
                    q.y + uy * depth + stick * ay + sy + ny,
                )
            })
            .collect();
        MarkerSet::new(t, positions)
    }

    /// Advances one frame period and returns the new state and markers.
    pub fn step(&mut self, grip_cmd: f64, external_tangential: f64) -> Result<(GraspSimState, MarkerSet)> {
        let dt = self.dt();
        self.state = step_grasp_physics(&self.state, &self.params, grip_cmd, external_tangential, dt)?;
        self.frame += 1;
        let travel = self.state.object_velocity * dt;
        if travel > 0.0 {
            let (ax, ay) = self.params.load_axis;
            for (s, &w) in self.shear.iter_mut().zip(&self.patch.slip_weight) {
                let inc = travel * w;
                let jx: f64 = StandardNormal.sample(&mut self.rng);
                let jy: f64 = StandardNormal.sample(&mut self.rng);
                s.0 += inc * ax + 0.35 * inc * jx;
                s.1 += inc * ay + 0.35 * inc * jy;
            }
        }
        let m = self.markers();
        Ok((self.state, m))
    }
}

/// Ground-truth trace as CSV.
pub fn write_trace_csv<W: Write>(writer: W, states: &[GraspSimState]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "t",
        "normal_force",
        "tangential_load",
        "object_velocity",
        "grip_command",
        "travel",
    ])?;
    for s in states {
        w.write_record([
            s.time.to_string(),
            s.normal_force.to_string(),
            s.tangential_load.to_string(),
            s.object_velocity.to_string(),
            s.grip_command.to_string(),
            s.travel.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
