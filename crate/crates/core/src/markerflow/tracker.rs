use super::{associate_markers, default_gate, MarkerSet, Point};

/// Turns per-frame detections (arbitrary order) into index-stable marker
/// sets.
///
/// The first frame with at least `min_markers` detections fixes the index
/// order. Later frames are associated with the previous tracked positions, so
/// large accumulated displacements stay trackable as long as frame-to-frame
/// motion is under the gate. Lost markers keep their last position.
#[derive(Debug, Clone)]
pub struct MarkerTracker {
    min_markers: usize,
    gate: f64,
    reference: Option<MarkerSet>,
    last: Vec<Point>,
}

impl MarkerTracker {
    pub fn new(min_markers: usize) -> Self {
        Self {
            min_markers,
            gate: f64::INFINITY,
            reference: None,
            last: Vec::new(),
        }
    }

    pub fn reference(&self) -> Option<&MarkerSet> {
        self.reference.as_ref()
    }

    pub fn reset(&mut self) {
        self.reference = None;
        self.last.clear();
    }

    /// Returns `None` until a reference frame has been established.
    pub fn update(&mut self, detected: &MarkerSet) -> Option<MarkerSet> {
        if self.reference.is_none() {
            if detected.len() < self.min_markers.max(1) {
                return None;
            }
            self.gate = default_gate(detected);
            self.reference = Some(detected.clone());
            self.last = detected.positions.clone();
            return Some(detected.clone());
        }
        let previous = MarkerSet::new(detected.timestamp, std::mem::take(&mut self.last));
        let corr = associate_markers(&previous, detected, Some(self.gate));
        let positions: Vec<Point> = previous
            .positions
            .iter()
            .enumerate()
            .map(|(i, p)| corr.get(i).map_or(*p, |j| detected.positions[j]))
            .collect();
        self.last = positions.clone();
        Some(MarkerSet::new(detected.timestamp, positions))
    }
}
