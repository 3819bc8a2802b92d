use super::{Correspondence, DisplacementField, MarkerSet};
use crate::error::{Error, Result};

/// Displacement of every reference marker in `current`.
///
/// Unmatched reference markers carry forward their value from `previous`
/// (zero when no previous field is supplied).
pub fn displacement_field(
    reference: &MarkerSet,
    current: &MarkerSet,
    corr: &Correspondence,
    previous: Option<&DisplacementField>,
) -> Result<DisplacementField> {
    let n = reference.len();
    if corr.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: corr.len(),
        });
    }
    if let Some(prev) = previous {
        if prev.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: prev.len(),
            });
        }
    }
    let mut dx = Vec::with_capacity(n);
    let mut dy = Vec::with_capacity(n);
    for (i, r) in reference.positions.iter().enumerate() {
        match corr.get(i) {
            Some(j) => {
                let c = current.positions.get(j).ok_or(Error::DimensionMismatch {
                    expected: j + 1,
                    got: current.len(),
                })?;
                dx.push(c.x - r.x);
                dy.push(c.y - r.y);
            }
            None => {
                let (px, py) = previous.map_or((0.0, 0.0), |p| (p.dx[i], p.dy[i]));
                dx.push(px);
                dy.push(py);
            }
        }
    }
    Ok(DisplacementField {
        timestamp: current.timestamp,
        dx,
        dy,
    })
}

/// Mean marker velocity in px/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Velocity {
    pub vx: f64,
    pub vy: f64,
}

/// Mean per-marker velocity between two fields sampled at `frequency` Hz:
/// `v_i = f * (D_i(t) - D_i(t - dt))`, averaged over markers.
pub fn velocity_features(
    field_t: &DisplacementField,
    field_prev: &DisplacementField,
    frequency: f64,
) -> Result<Velocity> {
    if field_t.len() != field_prev.len() {
        return Err(Error::DimensionMismatch {
            expected: field_prev.len(),
            got: field_t.len(),
        });
    }
    if field_t.is_empty() {
        return Err(Error::EmptyField);
    }
    if !(frequency > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "frequency must be positive, got {frequency}"
        )));
    }
    let n = field_t.len() as f64;
    let sx: f64 = field_t.dx.iter().zip(&field_prev.dx).map(|(a, b)| a - b).sum();
    let sy: f64 = field_t.dy.iter().zip(&field_prev.dy).map(|(a, b)| a - b).sum();
    Ok(Velocity {
        vx: frequency * sx / n,
        vy: frequency * sy / n,
    })
}

/// Mean displacement magnitude, 0 for an empty field.
pub fn mean_magnitude(field: &DisplacementField) -> f64 {
    if field.is_empty() {
        return 0.0;
    }
    field.magnitudes().sum::<f64>() / field.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markerflow::Point;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> MarkerSet {
        let mut pts = Vec::new();
        for r in 0..7 {
            for c in 0..9 {
                pts.push(Point::new(20.0 + 40.0 * c as f64, 20.0 + 40.0 * r as f64));
            }
        }
        MarkerSet::new(0.0, pts)
    }

    fn field(dx: Vec<f64>, dy: Vec<f64>) -> DisplacementField {
        DisplacementField {
            timestamp: 0.0,
            dx,
            dy,
        }
    }

    #[test]
    fn same_frame_gives_zero_field() {
        let g = grid();
        let f = displacement_field(&g, &g, &Correspondence::identity(63), None).unwrap();
        assert!(f.dx.iter().chain(&f.dy).all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_shift() {
        let g = grid();
        let f = displacement_field(&g, &g.translated(2.0, -1.0), &Correspondence::identity(63), None)
            .unwrap();
        for i in 0..63 {
            assert!((f.dx[i] - 2.0).abs() < 1e-12);
            assert!((f.dy[i] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_field_matches_rigid_rotation() {
        let g = grid();
        let c = g.centroid().unwrap();
        let th = 5f64.to_radians();
        let rotated = MarkerSet::new(
            0.04,
            g.positions
                .iter()
                .map(|p| {
                    let (x, y) = (p.x - c.x, p.y - c.y);
                    Point::new(
                        c.x + x * th.cos() - y * th.sin(),
                        c.y + x * th.sin() + y * th.cos(),
                    )
                })
                .collect(),
        );
        let f = displacement_field(&g, &rotated, &Correspondence::identity(63), None).unwrap();
        let (mut mx, mut my) = (0.0, 0.0);
        for (i, p) in g.positions.iter().enumerate() {
            let (x, y) = (p.x - c.x, p.y - c.y);
            let ex = x * (th.cos() - 1.0) - y * th.sin();
            let ey = x * th.sin() + y * (th.cos() - 1.0);
            assert!((f.dx[i] - ex).abs() < 1e-9);
            assert!((f.dy[i] - ey).abs() < 1e-9);
            // Perpendicular to the radius up to the second-order chord term.
            let radial = (f.dx[i] * x + f.dy[i] * y) / x.hypot(y).max(1e-9);
            assert!(radial.abs() <= x.hypot(y) * (1.0 - th.cos()) + 1e-9);
            mx += f.dx[i];
            my += f.dy[i];
        }
        assert!(mx.abs() / 63.0 < 1e-9 && my.abs() / 63.0 < 1e-9);
    }

    #[test]
    fn unmatched_carries_previous_value() {
        let g = grid();
        let mut mapping: Vec<Option<usize>> = (0..63).map(Some).collect();
        mapping[5] = None;
        let corr = Correspondence::from_mapping(mapping);
        let mut prev = DisplacementField::zeros(63, 0.0);
        prev.dx[5] = 3.5;
        prev.dy[5] = -0.5;
        let f = displacement_field(&g, &g.translated(1.0, 1.0), &corr, Some(&prev)).unwrap();
        assert_eq!((f.dx[5], f.dy[5]), (3.5, -0.5));
        assert_eq!(f.dx[4], 1.0);
        let f = displacement_field(&g, &g, &corr, None).unwrap();
        assert_eq!((f.dx[5], f.dy[5]), (0.0, 0.0));
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let g = grid();
        assert!(displacement_field(&g, &g, &Correspondence::identity(10), None).is_err());
        let short = DisplacementField::zeros(3, 0.0);
        assert!(displacement_field(&g, &g, &Correspondence::identity(63), Some(&short)).is_err());
    }

    #[test]
    fn velocity_examples() {
        let z = field(vec![0.0; 63], vec![0.0; 63]);
        assert_eq!(velocity_features(&z, &z, 25.0).unwrap(), Velocity::default());
        let a = field(vec![1.0; 63], vec![0.3; 63]);
        let b = field(vec![3.0; 63], vec![0.3; 63]);
        let v = velocity_features(&b, &a, 25.0).unwrap();
        assert!((v.vx - 50.0).abs() < 1e-12);
        assert_eq!(v.vy, 0.0);
    }

    #[test]
    fn velocity_errors() {
        let e = field(vec![], vec![]);
        assert!(matches!(velocity_features(&e, &e, 25.0), Err(Error::EmptyField)));
        let a = field(vec![0.0; 3], vec![0.0; 3]);
        let b = field(vec![0.0; 4], vec![0.0; 4]);
        assert!(velocity_features(&a, &b, 25.0).is_err());
        assert!(velocity_features(&a, &a, 0.0).is_err());
    }

    #[test]
    fn velocity_matches_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mk = |rng: &mut ChaCha8Rng| {
                field(
                    (0..63).map(|_| rng.random_range(-10.0..10.0)).collect(),
                    (0..63).map(|_| rng.random_range(-10.0..10.0)).collect(),
                )
            };
            let (a, b) = (mk(&mut rng), mk(&mut rng));
            let mut ox = 0.0;
            let mut oy = 0.0;
            for i in 0..63 {
                ox += 25.0 * (b.dx[i] - a.dx[i]);
                oy += 25.0 * (b.dy[i] - a.dy[i]);
            }
            ox /= 63.0;
            oy /= 63.0;
            let v = velocity_features(&b, &a, 25.0).unwrap();
            assert!((v.vx - ox).abs() < 1e-12 && (v.vy - oy).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn velocity_is_linear_in_difference(
            prev in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..40),
            diff_seed in any::<u64>(),
            alpha in -4.0f64..4.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(diff_seed);
            let n = prev.len();
            let diff: Vec<(f64, f64)> = (0..n)
                .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)))
                .collect();
            let p = field(prev.iter().map(|v| v.0).collect(), prev.iter().map(|v| v.1).collect());
            let t1 = field(
                (0..n).map(|i| p.dx[i] + diff[i].0).collect(),
                (0..n).map(|i| p.dy[i] + diff[i].1).collect(),
            );
            let ta = field(
                (0..n).map(|i| p.dx[i] + alpha * diff[i].0).collect(),
                (0..n).map(|i| p.dy[i] + alpha * diff[i].1).collect(),
            );
            let v1 = velocity_features(&t1, &p, 25.0).unwrap();
            let va = velocity_features(&ta, &p, 25.0).unwrap();
            prop_assert!((va.vx - alpha * v1.vx).abs() < 1e-9);
            prop_assert!((va.vy - alpha * v1.vy).abs() < 1e-9);
        }

        #[test]
        fn velocity_is_permutation_invariant(
            vals in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0, -5.0f64..5.0), 1..40),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut order: Vec<usize> = (0..vals.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let a = field(vals.iter().map(|v| v.0).collect(), vals.iter().map(|v| v.1).collect());
            let b = field(vals.iter().map(|v| v.2).collect(), vals.iter().map(|v| v.3).collect());
            let ap = field(order.iter().map(|&i| a.dx[i]).collect(), order.iter().map(|&i| a.dy[i]).collect());
            let bp = field(order.iter().map(|&i| b.dx[i]).collect(), order.iter().map(|&i| b.dy[i]).collect());
            let v = velocity_features(&b, &a, 25.0).unwrap();
            let vp = velocity_features(&bp, &ap, 25.0).unwrap();
            prop_assert!((v.vx - vp.vx).abs() < 1e-9 && (v.vy - vp.vy).abs() < 1e-9);
        }

        #[test]
        fn common_translation_leaves_field_unchanged(
            ox in -50.0f64..50.0, oy in -50.0f64..50.0,
            shift in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 63),
        ) {
            let g = grid();
            let cur = MarkerSet::new(
                0.04,
                g.positions.iter().zip(&shift).map(|(p, s)| Point::new(p.x + s.0, p.y + s.1)).collect(),
            );
            let id = Correspondence::identity(63);
            let f = displacement_field(&g, &cur, &id, None).unwrap();
            let ft = displacement_field(&g.translated(ox, oy), &cur.translated(ox, oy), &id, None).unwrap();
            for i in 0..63 {
                prop_assert!((f.dx[i] - ft.dx[i]).abs() < 1e-9);
                prop_assert!((f.dy[i] - ft.dy[i]).abs() < 1e-9);
            }
        }
    }
}
