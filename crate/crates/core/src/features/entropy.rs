use super::Histogram;
use crate::error::{Error, Result};

/// Shannon entropy in nats of the normalised histogram, with `0 ln 0 = 0`.
pub fn entropy(hist: &Histogram) -> Result<f64> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    let total = total as f64;
    let h = hist
        .counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / total;
            -p * p.ln()
        })
        .sum::<f64>();
    // A single occupied bin gives exactly zero; clamp the -0.0 case.
    Ok(h.max(0.0))
}

/// Forward-difference entropy rate in nats/s: `f * (E(t) - E(t - dt))`.
#[inline]
pub fn entropy_rate(e_t: f64, e_prev: f64, frequency: f64) -> f64 {
    frequency * (e_t - e_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hist(counts: Vec<u64>) -> Histogram {
        Histogram {
            bin_edges: (0..=counts.len()).map(|k| k as f64).collect(),
            counts,
        }
    }

    #[test]
    fn single_bin_is_zero() {
        assert_eq!(entropy(&hist(vec![0, 63, 0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn uniform_over_eight_bins() {
        let mut c = vec![5u64; 8];
        c.extend([0; 24]);
        let h = entropy(&hist(c)).unwrap();
        assert!((h - 8f64.ln()).abs() < 1e-12);
        assert!((h - 2.0794).abs() < 1e-4);
    }

    #[test]
    fn empty_histogram_is_an_error() {
        assert!(matches!(entropy(&hist(vec![0; 4])), Err(Error::EmptyHistogram)));
    }

    #[test]
    fn matches_compensated_summation_oracle() {
        // Oracle: Kahan-compensated sum of -p ln p using ln(c) - ln(N) in place
        // of ln(p), accumulated in a different order.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let counts: Vec<u64> = (0..32)
                .map(|_| if rng.random_bool(0.3) { 0 } else { rng.random_range(0..50) })
                .collect();
            let n: u64 = counts.iter().sum();
            if n == 0 {
                continue;
            }
            let (mut sum, mut comp) = (0.0f64, 0.0f64);
            for &c in counts.iter().rev() {
                if c == 0 {
                    continue;
                }
                let p = c as f64 / n as f64;
                let term = -p * ((c as f64).ln() - (n as f64).ln());
                let y = term - comp;
                let t = sum + y;
                comp = (t - sum) - y;
                sum = t;
            }
            let got = entropy(&hist(counts)).unwrap();
            assert!((got - sum).abs() <= 1e-12, "{got} vs {sum}");
        }
    }

    #[test]
    fn rate_examples() {
        assert_eq!(entropy_rate(1.3, 1.3, 25.0), 0.0);
        assert!((entropy_rate(1.0, 0.5, 25.0) - 12.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn bounded_by_log_bins(counts in proptest::collection::vec(0u64..100, 2..64)) {
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let b = counts.len();
            let occupied = counts.iter().filter(|&&c| c > 0).count();
            let h = entropy(&hist(counts)).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (b as f64).ln() + 1e-12);
            prop_assert_eq!(h == 0.0, occupied == 1);
        }

        #[test]
        fn order_free(mut counts in proptest::collection::vec(0u64..100, 2..64), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            prop_assume!(counts.iter().sum::<u64>() > 0);
            let h = entropy(&hist(counts.clone())).unwrap();
            counts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let hp = entropy(&hist(counts)).unwrap();
            prop_assert!((h - hp).abs() < 1e-12);
        }

        #[test]
        fn constant_sequence_has_zero_rate(e in 0.0f64..4.0, f in 1.0f64..200.0) {
            prop_assert_eq!(entropy_rate(e, e, f), 0.0);
        }
    }
}
