//! The corrected chain samples realizations with their multinomial
//! probabilities.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecopull::analytic::{self, Compositions, Realization, SifiModel};
use ecopull::config::AcceptanceRule;
use ecopull::mcmc::{self, Chain};
use ecopull::ScenarioConfig;

fn chi_square(model: &SifiModel, rule: AcceptanceRule, steps: u64, thin: u64, seed: u64) -> f64 {
    let mut states = Vec::new();
    let mut walk = Compositions::new(model.devices, model.images as usize + 1);
    while let Some(s) = walk.advance() {
        states.push(s.to_vec());
    }
    let mut counts = vec![0u64; states.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Chain::new(model, rule);
    for t in 0..steps {
        chain.step(&mut rng);
        if t % thin == 0 {
            counts[states.iter().position(|s| s == chain.state()).unwrap()] += 1;
        }
    }
    let n = counts.iter().sum::<u64>() as f64;
    states
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            let p = analytic::realization_pmf(&Realization::new(s.clone()), model.images, model.devices, model.p_th)
                .unwrap();
            (c as f64 - n * p).powi(2) / (n * p)
        })
        .sum()
}

#[test]
fn hastings_chain_matches_realization_pmf() {
    let cfg = ScenarioConfig {
        device_count: 3,
        images_per_device: 2,
        ..ScenarioConfig::default()
    };
    let model = SifiModel::new(&cfg).unwrap();
    // 10 states, 9 degrees of freedom, alpha = 0.01.
    for seed in [1, 2, 3] {
        let chi2 = chi_square(&model, AcceptanceRule::Hastings, 1_000_000, 10, seed);
        assert!(chi2 < 21.666, "seed {seed}: chi2 = {chi2}");
    }
}

#[test]
fn verbatim_metropolis_is_biased_on_asymmetric_proposals() {
    // Documents why the corrected rule exists: the verbatim ratio does not
    // leave realization_pmf invariant.
    let cfg = ScenarioConfig {
        device_count: 3,
        images_per_device: 2,
        ..ScenarioConfig::default()
    };
    let model = SifiModel::new(&cfg).unwrap();
    let chi2 = chi_square(&model, AcceptanceRule::Metropolis, 1_000_000, 10, 1);
    assert!(chi2 > 100.0, "chi2 = {chi2}");
}

#[test]
fn hastings_estimate_matches_exact() {
    for (k, n, l) in [(2, 4, 2), (3, 6, 4), (5, 4, 2)] {
        let mut cfg = ScenarioConfig {
            device_count: k,
            images_per_device: n,
            slots_per_frame: Some(l),
            ..ScenarioConfig::default()
        };
        cfg.analysis.acceptance = AcceptanceRule::Hastings;
        let exact = analytic::expected_sifi_exact(&cfg).unwrap();
        let est = mcmc::expected_sifi_mcmc(&cfg, 200_000, 5).unwrap();
        assert!((exact - est).abs() < 0.005, "K={k} N={n} L={l}: {exact} vs {est}");
    }
}
