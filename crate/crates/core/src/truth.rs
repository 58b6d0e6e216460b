//! Distributions of the true similarity `β ∈ [0, 1]` between an image and the
//! query.

use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaDist, Continuous, ContinuousCDF};

use crate::error::{out_of_range, Result};
use crate::quadrature;

/// Density of the true similarity over `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthDistribution {
    #[default]
    Uniform,
    /// Beta(α, β) restricted to `α, β ≥ 1` so the density stays bounded.
    Beta { alpha: f64, beta: f64 },
}

impl TruthDistribution {
    pub fn validate(&self) -> Result<()> {
        if let TruthDistribution::Beta { alpha, beta } = *self {
            if !(alpha >= 1.0 && alpha.is_finite()) {
                return Err(out_of_range("truth_distribution.alpha", alpha, ">= 1"));
            }
            if !(beta >= 1.0 && beta.is_finite()) {
                return Err(out_of_range("truth_distribution.beta", beta, ">= 1"));
            }
        }
        Ok(())
    }

    fn beta_dist(alpha: f64, beta: f64) -> BetaDist {
        BetaDist::new(alpha, beta).expect("shape parameters validated")
    }

    pub fn density(&self, x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match *self {
            TruthDistribution::Uniform => 1.0,
            TruthDistribution::Beta { alpha, beta } => Self::beta_dist(alpha, beta).pdf(x),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        match *self {
            TruthDistribution::Uniform => x,
            TruthDistribution::Beta { alpha, beta } => Self::beta_dist(alpha, beta).cdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TruthDistribution::Uniform => rng.random::<f64>(),
            TruthDistribution::Beta { alpha, beta } => rand_distr::Beta::new(alpha, beta)
                .expect("shape parameters validated")
                .sample(rng),
        }
    }

    /// Numerically integrated total mass over `[0, 1]`.
    pub fn total_mass(&self) -> Result<f64> {
        quadrature::integrate(
            |x| self.density(x),
            0.0,
            1.0,
            &[],
            quadrature::DEFAULT_TOLERANCE * 0.1,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_cdf_is_identity() {
        let g = TruthDistribution::Uniform;
        for i in 0..=100 {
            let x = i as f64 / 100.0;
            assert_eq!(g.cdf(x), x);
        }
        assert_eq!(g.cdf(-0.5), 0.0);
        assert_eq!(g.cdf(1.5), 1.0);
    }

    #[test]
    fn densities_integrate_to_one() {
        for g in [
            TruthDistribution::Uniform,
            TruthDistribution::Beta { alpha: 2.0, beta: 5.0 },
            TruthDistribution::Beta { alpha: 1.0, beta: 1.0 },
        ] {
            let m = g.total_mass().unwrap();
            assert!((m - 1.0).abs() < 1e-9, "{g:?} mass {m}");
        }
    }

    #[test]
    fn beta_cdf_is_monotone_with_fixed_endpoints() {
        let g = TruthDistribution::Beta { alpha: 2.0, beta: 3.0 };
        assert_eq!(g.cdf(0.0), 0.0);
        assert_eq!(g.cdf(1.0), 1.0);
        let mut prev = 0.0;
        for i in 0..=200 {
            let c = g.cdf(i as f64 / 200.0);
            assert!(c >= prev);
            prev = c;
        }
    }

    #[test]
    fn rejects_unbounded_beta() {
        assert!(TruthDistribution::Beta { alpha: 0.5, beta: 2.0 }.validate().is_err());
    }

    #[test]
    fn uniform_sample_histogram_passes_chi_square() {
        // 20 equiprobable bins, 1e5 draws; chi-square critical value at
        // 19 dof and significance 0.001 is 43.82.
        let g = TruthDistribution::Uniform;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut bins = [0u32; 20];
        for _ in 0..n {
            let x = g.sample(&mut rng);
            bins[((x * 20.0) as usize).min(19)] += 1;
        }
        let expected = n as f64 / 20.0;
        let chi2: f64 = bins
            .iter()
            .map(|&o| (o as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 43.82, "chi2 = {chi2}");
    }
}
