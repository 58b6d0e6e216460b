//! Significance-and-fidelity (SiFi) score of a retrieval round.

use crate::error::{out_of_range, Result};

/// Fitted normalized FID distance between an image and its reconstruction
/// from a latent at `rate` bits per pixel. Zero means a perfect reconstruction.
pub const FIDELITY_BASE: f64 = 0.0725;

pub fn fidelity_distance(rate: f64) -> Result<f64> {
    if rate.is_nan() || rate < 0.0 {
        return Err(out_of_range("compression_rate", rate, ">= 0"));
    }
    Ok(FIDELITY_BASE.powf(rate))
}

/// One stored image as seen by the simulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageRecord {
    /// `β`: similarity under the full behavior model.
    pub true_similarity: f64,
    /// `s = β + w`: similarity computed on the device.
    pub observed_similarity: f64,
    /// `s ≥ V_th`.
    pub is_relevant: bool,
    /// `β ≥ δ`.
    pub is_actual_relevant: bool,
    /// Sent in a slot with no other transmission.
    pub delivered: bool,
}

impl ImageRecord {
    pub fn new(true_similarity: f64, observed_similarity: f64, relevance: f64, truth: f64) -> Self {
        Self {
            true_similarity,
            observed_similarity,
            is_relevant: observed_similarity >= relevance,
            is_actual_relevant: true_similarity >= truth,
            delivered: false,
        }
    }
}

/// Loss charged to one actually relevant image.
#[inline]
fn loss(delivered: bool, distance: f64, penalty: f64) -> f64 {
    if delivered {
        distance
    } else {
        penalty
    }
}

/// SiFi from a precomputed fidelity distance. Returns 1 when no image is
/// actually relevant.
pub fn sifi_with_distance<'a, I>(records: I, penalty: f64, distance: f64) -> f64
where
    I: IntoIterator<Item = &'a ImageRecord>,
{
    let (count, total) = records
        .into_iter()
        .filter(|r| r.is_actual_relevant)
        .fold((0usize, 0.0), |(n, acc), r| (n + 1, acc + loss(r.delivered, distance, penalty)));
    if count == 0 {
        1.0
    } else {
        1.0 - total / count as f64
    }
}

/// Realized SiFi of a finished round at compression rate `rate`.
pub fn realized_sifi(records: &[ImageRecord], penalty: f64, rate: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&penalty) {
        return Err(out_of_range("penalty", penalty, "[0, 1]"));
    }
    let distance = fidelity_distance(rate)?;
    if penalty < distance {
        log::warn!("penalty {penalty} is below the fidelity distance {distance} at r = {rate}");
    }
    Ok(sifi_with_distance(records, penalty, distance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn actual(delivered: bool) -> ImageRecord {
        ImageRecord {
            true_similarity: 0.95,
            observed_similarity: 0.95,
            is_relevant: true,
            is_actual_relevant: true,
            delivered,
        }
    }

    #[test]
    fn fidelity_curve_points() {
        assert_eq!(fidelity_distance(1.0).unwrap(), 0.0725);
        assert_eq!(fidelity_distance(0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(fidelity_distance(2.0).unwrap(), 0.005_256_25, epsilon = 1e-15);
        assert!(fidelity_distance(-0.1).is_err());
    }

    #[test]
    fn empty_omega_scores_one() {
        let mut r = actual(false);
        r.is_actual_relevant = false;
        assert_eq!(realized_sifi(&[r, r], 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(realized_sifi(&[], 1.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn perfect_retrieval_with_zero_distance() {
        let recs = [actual(true), actual(true)];
        assert_eq!(sifi_with_distance(&recs, 1.0, 0.0), 1.0);
    }

    #[test]
    fn mixed_outcome() {
        let recs = [actual(true), actual(false)];
        assert_abs_diff_eq!(realized_sifi(&recs, 1.0, 1.0).unwrap(), 0.46375, epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn sifi_bounded_and_monotone(
            flags in proptest::collection::vec((any::<bool>(), any::<bool>()), 0..40),
            penalty in 0.0f64..=1.0,
            rate in 0.0f64..6.0,
            flip in 0usize..40,
        ) {
            let recs: Vec<ImageRecord> = flags.iter().map(|&(a, d)| {
                let mut r = actual(d);
                r.is_actual_relevant = a;
                r
            }).collect();
            let v = realized_sifi(&recs, penalty, rate).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));

            // Higher rate never hurts at fixed delivery outcomes.
            let w = realized_sifi(&recs, penalty, rate + 0.5).unwrap();
            prop_assert!(w >= v - 1e-12);

            // Delivering one more image never hurts when Γ ≥ k_d.
            if !recs.is_empty() && penalty >= fidelity_distance(rate).unwrap() {
                let mut better = recs.clone();
                let i = flip % better.len();
                better[i].delivered = true;
                prop_assert!(realized_sifi(&better, penalty, rate).unwrap() >= v - 1e-12);
            }
        }
    }
}
