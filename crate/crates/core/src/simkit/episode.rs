use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::patch::{ContactPatch, GelGrid};
use super::scenario::{Scenario, ScenarioKind};
use crate::error::Result;
use crate::features::Label;
use crate::markerflow::{MarkerSet, Point};

/// Ground-truth object speed (px/frame, measured at the contact edge) above
/// which a frame counts as slipping.
pub const SLIP_EPSILON: f64 = 0.1;

/// Peak depth of the static contact field at unit stiffness, px.
const BASE_PEAK: f64 = 3.5;
/// Accumulated edge shear at which a slip phase is cut short, px. Keeps
/// every magnitude inside the histogram range.
const SHEAR_CAP: f64 = 24.0;
/// Lowest planned slip speed, px/frame; modulation keeps it above
/// [`SLIP_EPSILON`].
const MIN_SLIP_SPEED: f64 = 0.15;

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    pub scenario: Scenario,
    pub seed: u64,
    /// Undeformed gel, the calibration frame every displacement is taken
    /// against.
    pub reference: MarkerSet,
    pub frames: Vec<MarkerSet>,
    pub labels: Vec<Label>,
    /// Ground-truth object speed relative to the gel, px/frame.
    pub object_velocity: Vec<f64>,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn slip_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_slip()).count()
    }

    /// Index of the first slipping frame.
    pub fn first_slip(&self) -> Option<usize> {
        self.labels.iter().position(|l| l.is_slip())
    }
}

struct SlipPlan {
    start: usize,
    speed: f64,
    period: f64,
    phase: f64,
    tail: usize,
}

impl SlipPlan {
    fn draw(s: &Scenario, n: usize, rng: &mut impl Rng) -> Self {
        let scale = (0.5 / s.mu).clamp(0.5, 2.0);
        let start = ((rng.random_range(0.15..0.3) * n as f64).round() as usize).max(1);
        let tail = (rng.random_range(0.05..0.25) * n as f64).round() as usize;
        // Slow down so the planned phase fits under the shear cap, but never
        // below a speed that is clearly slipping.
        let length = n.saturating_sub(start + tail).max(1) as f64;
        let speed = (rng.random_range(0.2..0.5) * scale)
            .min(SHEAR_CAP / (1.25 * length))
            .max(MIN_SLIP_SPEED);
        Self {
            start,
            speed,
            period: rng.random_range(0.5..1.5) * s.frequency,
            phase: rng.random_range(0.0..TAU),
            tail,
        }
    }

    /// Edge speed of each frame; zero outside the slip phase.
    fn speeds(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        let mut travelled = 0.0;
        for (k, vk) in v
            .iter_mut()
            .enumerate()
            .take(n.saturating_sub(self.tail))
            .skip(self.start)
        {
            let s = self.speed * (1.0 + 0.25 * (TAU * k as f64 / self.period + self.phase).sin());
            if travelled + s > SHEAR_CAP {
                break;
            }
            travelled += s;
            *vk = s;
        }
        v
    }
}

/// Generates one labelled episode; identical `(scenario, seed)` give a
/// bitwise identical result.
pub fn generate_episode(scenario: &Scenario, seed: u64) -> Result<Episode> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = GelGrid::default();
    let rest = grid.positions();
    let n = scenario.frame_count();
    let m = rest.len();
    let f = scenario.frequency;
    let peak = BASE_PEAK / scenario.stiffness;
    let mut patch = ContactPatch::random(&grid, 15.0, &mut rng);
    if scenario.kind == ScenarioKind::RotSlip {
        // Objects twist about a point away from the contact centre.
        let a = rng.random_range(0.0..TAU);
        let d = rng.random_range(60.0..120.0);
        let pivot = Point::new(patch.center.x + d * a.cos(), patch.center.y + d * a.sin());
        patch.tangent = ContactPatch::tangent_about(&grid, pivot);
    }

    let mut fields: Vec<Vec<(f64, f64)>> = vec![vec![(0.0, 0.0); m]; n];
    let mut velocity = vec![0.0; n];
    let base = |scale: f64| -> Vec<(f64, f64)> {
        patch.unit_field.iter().map(|&(x, y)| (x * peak * scale, y * peak * scale)).collect()
    };
    let uniform = |amp: f64, period: f64, dir: (f64, f64), k: usize| -> (f64, f64) {
        let u = amp * (1.0 - (TAU * k as f64 / period).cos()) / 2.0;
        (u * dir.0, u * dir.1)
    };

    match scenario.kind {
        ScenarioKind::NoContact => {}
        ScenarioKind::StableGrasp => {
            let a = rng.random_range(0.0..TAU);
            let dir = (a.cos(), a.sin());
            let amp = rng.random_range(0.0..0.5);
            let period = rng.random_range(3.0..5.0) * f;
            let b = base(1.0);
            for (k, field) in fields.iter_mut().enumerate() {
                let (ux, uy) = uniform(amp, period, dir, k);
                for (d, &(bx, by)) in field.iter_mut().zip(&b) {
                    *d = (bx + ux, by + uy);
                }
            }
        }
        ScenarioKind::TransSlipX | ScenarioKind::TransSlipY | ScenarioKind::RotSlip => {
            let plan = SlipPlan::draw(scenario, n, &mut rng);
            let drawn = rng.random_bool(0.5);
            let sign = if scenario.reverse.unwrap_or(drawn) { -1.0 } else { 1.0 };
            velocity = plan.speeds(n);
            // Once the object stops, the grip is squeezed up to a new level.
            let stop = velocity.iter().rposition(|&v| v > 0.0).map_or(n, |k| k + 1);
            let squeeze = rng.random_range(0.0..0.8);
            let ramp = rng.random_range(0.2..0.8) * f;
            let unit = &patch.unit_field;
            let mut shear = vec![(0.0, 0.0); m];
            for (k, field) in fields.iter_mut().enumerate() {
                let scale = if k < stop {
                    1.0
                } else {
                    1.0 + squeeze * ((k - stop + 1) as f64 / ramp).min(1.0)
                };
                let v = velocity[k];
                if v > 0.0 {
                    for (i, s) in shear.iter_mut().enumerate() {
                        let (dir, gain) = match scenario.kind {
                            ScenarioKind::TransSlipX => ((sign, 0.0), patch.slip_weight[i]),
                            ScenarioKind::TransSlipY => ((0.0, sign), patch.slip_weight[i]),
                            _ => {
                                let t = patch.tangent[i];
                                let g = t.0.hypot(t.1);
                                if g > 0.0 {
                                    ((sign * t.0 / g, sign * t.1 / g), g)
                                } else {
                                    ((0.0, 0.0), 0.0)
                                }
                            }
                        };
                        let jitter = 0.35 * v * gain;
                        let jx: f64 = StandardNormal.sample(&mut rng);
                        let jy: f64 = StandardNormal.sample(&mut rng);
                        s.0 += v * gain * dir.0 + jitter * jx;
                        s.1 += v * gain * dir.1 + jitter * jy;
                    }
                }
                for ((d, &(ux, uy)), &(sx, sy)) in field.iter_mut().zip(unit).zip(&shear) {
                    *d = (ux * peak * scale + sx, uy * peak * scale + sy);
                }
            }
        }
        ScenarioKind::AccelNoSlip => {
            let a = rng.random_range(0.0..TAU);
            let dir = (a.cos(), a.sin());
            let amp = (rng.random_range(1.5..8.0) * scenario.mass / 0.5).min(20.0);
            let period = rng.random_range(1.5..3.5) * f;
            for (k, field) in fields.iter_mut().enumerate() {
                let u = uniform(amp, period, dir, k);
                field.iter_mut().for_each(|d| *d = u);
            }
        }
        ScenarioKind::ContactLoss => {
            let start = (rng.random_range(0.2..0.5) * n as f64).round() as usize;
            let tau = rng.random_range(0.15..0.6) * f;
            for (k, field) in fields.iter_mut().enumerate() {
                let scale = if k < start {
                    1.0
                } else {
                    (-((k - start) as f64) / tau).exp()
                };
                *field = base(scale);
            }
        }
    }

    let noise = (scenario.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, scenario.noise_sigma).expect("validated sigma"));
    let frames = fields
        .iter()
        .enumerate()
        .map(|(k, field)| {
            let t = k as f64 / f;
            let positions = rest
                .iter()
                .zip(field)
                .map(|(p, &(dx, dy))| {
                    let (nx, ny) = match &noise {
                        Some(d) => (d.sample(&mut rng), d.sample(&mut rng)),
                        None => (0.0, 0.0),
                    };
                    Point::new(p.x + dx + nx, p.y + dy + ny)
                })
                .collect();
            MarkerSet::new(t, positions)
        })
        .collect();
    let labels = velocity.iter().map(|&v| Label::from(v > SLIP_EPSILON)).collect();
    Ok(Episode {
        scenario: scenario.clone(),
        seed,
        reference: grid.rest(0.0),
        frames,
        labels,
        object_velocity: velocity,
    })
}
