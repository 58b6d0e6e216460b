//! Property tests for the model invariants.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ecopull::analytic::{self, Realization, SifiModel};
use ecopull::baselines::baseline_energy;
use ecopull::config::{slots_for_rate, AcceptanceRule};
use ecopull::energy::{self, computation_energy, p_rel, p_th};
use ecopull::mac;
use ecopull::mcmc::Chain;
use ecopull::report::format_float;
use ecopull::truth::TruthDistribution;
use ecopull::{load_config, ScenarioConfig};

fn truth() -> impl Strategy<Value = TruthDistribution> {
    prop_oneof![
        Just(TruthDistribution::Uniform),
        (1.0f64..6.0, 1.0f64..6.0).prop_map(|(alpha, beta)| TruthDistribution::Beta { alpha, beta }),
    ]
}

fn composition(devices: u32, bins: usize) -> impl Strategy<Value = Vec<u32>> {
    proptest::collection::vec(0..bins, devices as usize).prop_map(move |picks| {
        let mut q = vec![0u32; bins];
        for b in picks {
            q[b] += 1;
        }
        q
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_th_is_a_probability_and_falls_with_threshold(
        g in truth(),
        sigma in 0.0f64..0.5,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let p_lo = p_th(lo, sigma, &g).unwrap();
        let p_hi = p_th(hi, sigma, &g).unwrap();
        prop_assert!((0.0..=1.0).contains(&p_lo));
        prop_assert!(p_hi <= p_lo + 1e-9);
    }

    #[test]
    fn p_rel_is_a_distribution(images in 0u32..150, p in 0.0f64..=1.0) {
        let total: f64 = (0..=images).map(|nu| p_rel(nu, images, p).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slots_fall_with_rate(c in 1u32..12, r1 in 0.2f64..6.0, r2 in 0.2f64..6.0) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(slots_for_rate(hi, c) <= slots_for_rate(lo, c));
        prop_assert!(slots_for_rate(hi, c) >= c);
        prop_assert_eq!(slots_for_rate(hi, c) % c, 0);
    }

    #[test]
    fn success_probability_falls_when_mass_moves_up(
        q in composition(6, 5),
        slots in 1u32..20,
        from in 0usize..4,
    ) {
        let base = analytic::success_probability(&Realization::new(q.clone()), slots);
        prop_assert!((0.0..=1.0).contains(&base));
        // Move one device from `from` to the next bin; if that bin is the
        // last occupied one the frame count grows, so compare per frame.
        if q[from] > 0 && from >= 1 {
            let mut moved = q.clone();
            moved[from] -= 1;
            moved[from + 1] += 1;
            let keep = 1.0 - 1.0 / f64::from(slots);
            let w = |c: &[u32], f: usize| c[f..].iter().sum::<u32>();
            for f in 1..q.len() {
                let before = if w(&q, f) > 0 { keep.powi(w(&q, f) as i32 - 1) } else { 1.0 };
                let after = if w(&moved, f) > 0 { keep.powi(w(&moved, f) as i32 - 1) } else { 1.0 };
                prop_assert!(w(&moved, f) >= w(&q, f));
                if w(&q, f) > 0 {
                    prop_assert!(after <= before);
                }
            }
        }
    }

    #[test]
    fn state_values_lie_in_unit_interval(
        q in composition(4, 7),
        v in 0.3f64..0.9,
        slots in 1u32..10,
        penalty in 0.0f64..=1.0,
    ) {
        let cfg = ScenarioConfig {
            device_count: 4,
            images_per_device: 6,
            relevance_threshold: v,
            slots_per_frame: Some(slots),
            penalty,
            ..ScenarioConfig::default()
        };
        let model = SifiModel::new(&cfg).unwrap();
        let u = model.state_value(&q);
        prop_assert!((0.0..=1.0).contains(&u));
    }

    #[test]
    fn chain_states_keep_device_count(
        k in 1u32..8,
        n in 1u32..12,
        v in 0.0f64..1.0,
        seed in any::<u64>(),
        hastings in any::<bool>(),
    ) {
        let cfg = ScenarioConfig {
            device_count: k,
            images_per_device: n,
            relevance_threshold: v,
            ..ScenarioConfig::default()
        };
        let model = SifiModel::new(&cfg).unwrap();
        let rule = if hastings { AcceptanceRule::Hastings } else { AcceptanceRule::Metropolis };
        let mut chain = Chain::new(&model, rule);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            chain.step(&mut rng);
            prop_assert_eq!(chain.state().iter().sum::<u32>(), k);
            prop_assert_eq!(chain.state().len(), n as usize + 1);
        }
    }

    #[test]
    fn computation_energy_grows_with_relevant_images(s in 0u32..100) {
        let cfg = ScenarioConfig::default();
        prop_assert!(computation_energy(&cfg, s + 1).unwrap() > computation_energy(&cfg, s).unwrap());
    }

    #[test]
    fn expected_energy_forms_agree(v in 0.0f64..=1.0, r in 0.5f64..5.0, n in 1u32..300) {
        let cfg = ScenarioConfig { images_per_device: n, ..ScenarioConfig::default() }
            .with_operating_point(v, r);
        let a = energy::expected_total_energy(&cfg).unwrap();
        let b = energy::expected_total_energy_closed_form(&cfg).unwrap();
        prop_assert!(((a - b) / b).abs() < 1e-9);
    }

    #[test]
    fn baseline_is_linear_in_images(n in 0u32..1000) {
        let one = baseline_energy(&ScenarioConfig { images_per_device: 1, ..ScenarioConfig::default() });
        let many = baseline_energy(&ScenarioConfig { images_per_device: n, ..ScenarioConfig::default() });
        prop_assert!((many - f64::from(n) * one).abs() <= 1e-12 * many.max(1.0));
    }

    #[test]
    fn simulated_rounds_conserve_images(seed in any::<u64>(), k in 1u32..6, n in 1u32..30, l in 1u32..6) {
        let cfg = ScenarioConfig {
            device_count: k,
            images_per_device: n,
            slots_per_frame: Some(l),
            ..ScenarioConfig::default()
        };
        let o = mac::run_round(&cfg, seed).unwrap();
        let relevant: u32 = o.relevant_counts.iter().sum();
        prop_assert_eq!(o.delivered_count + o.collided_count, relevant);
        prop_assert_eq!(o.frames_used, o.relevant_counts.iter().copied().max().unwrap_or(0));
        prop_assert!((0.0..=1.0).contains(&o.sifi));
    }

    #[test]
    fn configs_round_trip_through_toml(v in 0.0f64..=1.0, r in 0.1f64..8.0, k in 1u32..50) {
        let cfg = ScenarioConfig { device_count: k, ..ScenarioConfig::default() }.with_operating_point(v, r);
        prop_assert_eq!(load_config(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn csv_floats_keep_nine_digits(x in -1e12f64..1e12) {
        prop_assume!(x != 0.0);
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert!(((back - x) / x).abs() <= 5e-9);
    }
}
