//! Marker extraction, tracking and displacement fields.
//!
//! A tactile frame shows a grid of dark gel markers. Markers are detected as
//! connected dark blobs, associated with a reference set, and converted to a
//! per-marker displacement field `(dx_i, dy_i)`. Mean marker velocities are
//! the frame-rate-scaled finite difference of two consecutive fields.

mod associate;
mod detect;
mod field;
mod frame;
mod io;
mod tracker;

pub use associate::{associate_markers, default_gate, Correspondence};
pub use detect::{detect_markers, Connectivity, DetectParams};
pub use field::{displacement_field, mean_magnitude, velocity_features, Velocity};
pub use frame::{read_pgm, read_pgm_dir, render_markers, write_pgm, GrayFrame};
pub use io::{read_marker_csv, write_marker_csv};
pub use tracker::MarkerTracker;

use serde::{Deserialize, Serialize};

/// Default number of gel markers (a 9 x 7 grid).
pub const DEFAULT_MARKER_COUNT: usize = 63;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Marker centroids for one tactile frame. Index `i` refers to the same
/// physical marker across a stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarkerSet {
    pub timestamp: f64,
    pub positions: Vec<Point>,
}

impl MarkerSet {
    pub fn new(timestamp: f64, positions: Vec<Point>) -> Self {
        Self {
            timestamp,
            positions,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Applies the same offset to every marker.
    pub fn translated(&self, dx: f64, dy: f64) -> MarkerSet {
        MarkerSet {
            timestamp: self.timestamp,
            positions: self
                .positions
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }

    pub fn centroid(&self) -> Option<Point> {
        if self.positions.is_empty() {
            return None;
        }
        let n = self.positions.len() as f64;
        let (sx, sy) = self
            .positions
            .iter()
            .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
        Some(Point::new(sx / n, sy / n))
    }
}

/// Per-marker displacement relative to a reference marker set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DisplacementField {
    pub timestamp: f64,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
}

impl DisplacementField {
    pub fn zeros(n: usize, timestamp: f64) -> Self {
        Self {
            timestamp,
            dx: vec![0.0; n],
            dy: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.dx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dx.is_empty()
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.dx.iter().zip(&self.dy).map(|(x, y)| x.hypot(*y))
    }
}
