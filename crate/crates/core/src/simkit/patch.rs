use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::markerflow::{MarkerSet, Point};

/// Rest layout of the gel markers: a regular grid, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GelGrid {
    pub cols: usize,
    pub rows: usize,
    pub spacing: f64,
    pub margin: f64,
}

impl Default for GelGrid {
    fn default() -> Self {
        Self {
            cols: 9,
            rows: 7,
            spacing: 40.0,
            margin: 40.0,
        }
    }
}

impl GelGrid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn width(&self) -> f64 {
        2.0 * self.margin + (self.cols.max(1) - 1) as f64 * self.spacing
    }

    pub fn height(&self) -> f64 {
        2.0 * self.margin + (self.rows.max(1) - 1) as f64 * self.spacing
    }

    pub fn center(&self) -> Point {
        Point::new(self.width() / 2.0, self.height() / 2.0)
    }

    pub fn positions(&self) -> Vec<Point> {
        (0..self.rows)
            .flat_map(|r| {
                (0..self.cols).map(move |c| {
                    Point::new(
                        self.margin + c as f64 * self.spacing,
                        self.margin + r as f64 * self.spacing,
                    )
                })
            })
            .collect()
    }

    pub fn rest(&self, timestamp: f64) -> MarkerSet {
        MarkerSet::new(timestamp, self.positions())
    }
}

/// Static shape of one contact: where it sits on the gel and how each marker
/// responds to normal load, slip and twist.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactPatch {
    pub center: Point,
    /// Normal-load field at unit peak, per marker.
    pub unit_field: Vec<(f64, f64)>,
    /// Slip gain per marker in [0, 1], larger towards the contact edge.
    pub slip_weight: Vec<f64>,
    /// Rigid-rotation direction scaled by r / r_max, per marker.
    pub tangent: Vec<(f64, f64)>,
}

impl ContactPatch {
    /// Random patch centred within `max_offset` px of the grid centre.
    pub fn random(grid: &GelGrid, max_offset: f64, rng: &mut impl Rng) -> Self {
        let c0 = grid.center();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let d = max_offset * rng.random::<f64>().sqrt();
        let center = Point::new(c0.x + d * a.cos(), c0.y + d * a.sin());
        let spread = rng.random_range(0.45..0.65);
        let power = rng.random_range(1.0..2.0);
        let texture = rng.random_range(0.12..0.25);
        Self::build(grid, center, spread, power, texture, rng)
    }

    pub fn build(
        grid: &GelGrid,
        center: Point,
        spread: f64,
        power: f64,
        texture: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let pos = grid.positions();
        let r_max = pos
            .iter()
            .map(|p| p.distance(&center))
            .fold(0.0, f64::max)
            .max(1e-9);
        let scale = spread * r_max;
        let mut unit_field = Vec::with_capacity(pos.len());
        let mut slip_weight = Vec::with_capacity(pos.len());
        for p in &pos {
            let (ox, oy) = (p.x - center.x, p.y - center.y);
            let r = (ox * ox + oy * oy).sqrt();
            let rho = r / scale;
            let g = rho * (1.0 - rho).exp();
            let (ux, uy) = if r > 0.0 { (ox / r, oy / r) } else { (0.0, 0.0) };
            let tx: f64 = StandardNormal.sample(rng);
            let ty: f64 = StandardNormal.sample(rng);
            unit_field.push((g * ux + texture * tx, g * uy + texture * ty));
            slip_weight.push((r / r_max).powf(power));
        }
        Self {
            center,
            unit_field,
            slip_weight,
            tangent: Self::tangent_about(grid, center),
        }
    }

    /// Rigid-rotation directions about `pivot`, scaled by r / r_max.
    pub fn tangent_about(grid: &GelGrid, pivot: Point) -> Vec<(f64, f64)> {
        let pos = grid.positions();
        let r_max = pos
            .iter()
            .map(|p| p.distance(&pivot))
            .fold(0.0, f64::max)
            .max(1e-9);
        pos.iter()
            .map(|p| (-(p.y - pivot.y) / r_max, (p.x - pivot.x) / r_max))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.unit_field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unit_field.is_empty()
    }

    pub fn mean_slip_weight(&self) -> f64 {
        self.slip_weight.iter().sum::<f64>() / self.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn grid_geometry() {
        let g = GelGrid::default();
        assert_eq!(g.len(), 63);
        assert_eq!((g.width(), g.height()), (400.0, 320.0));
        let p = g.positions();
        assert_eq!(p[0], Point::new(40.0, 40.0));
        assert_eq!(p[62], Point::new(360.0, 280.0));
    }

    #[test]
    fn slip_weight_grows_with_radius() {
        let g = GelGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ContactPatch::build(&g, g.center(), 0.5, 1.5, 0.0, &mut rng);
        let pos = g.positions();
        let c = g.center();
        for i in 0..pos.len() {
            for j in 0..pos.len() {
                if pos[i].distance(&c) < pos[j].distance(&c) - 1e-9 {
                    assert!(p.slip_weight[i] < p.slip_weight[j]);
                }
            }
        }
        assert!(p.slip_weight.iter().all(|&w| (0.0..=1.0).contains(&w)));
        assert_eq!(p.slip_weight.iter().cloned().fold(0.0, f64::max), 1.0);
    }

    #[test]
    fn tangent_is_perpendicular() {
        let g = GelGrid::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ContactPatch::random(&g, 30.0, &mut rng);
        for (q, t) in g.positions().iter().zip(&p.tangent) {
            let dot = (q.x - p.center.x) * t.0 + (q.y - p.center.y) * t.1;
            assert!(dot.abs() < 1e-9);
        }
    }
}
