//! Monte Carlo simulation of one pull round: similarity scoring, relevance
//! filtering, then frame-by-frame slotted ALOHA without retransmissions until
//! every queue has drained.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::ScenarioConfig;
use crate::energy::{device_energy, EnergyBreakdown};
use crate::error::Result;
use crate::par::{self, Execution};
use crate::sifi::{fidelity_distance, sifi_with_distance, ImageRecord};

/// One device's images and its queue of relevant images awaiting transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceState {
    pub device_id: usize,
    pub records: Vec<ImageRecord>,
    /// Indices into `records` of relevant images not yet attempted.
    pub queue: Vec<usize>,
}

impl DeviceState {
    pub fn relevant_count(&self) -> u32 {
        self.records.iter().filter(|r| r.is_relevant).count() as u32
    }
}

/// Contention statistics of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameStat {
    /// Devices that transmitted in this frame.
    pub active: u32,
    /// Transmissions alone in their slot.
    pub delivered: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub sifi: f64,
    pub per_device_energy: Vec<EnergyBreakdown>,
    /// `S^i` per device.
    pub relevant_counts: Vec<u32>,
    pub frames_used: u32,
    pub delivered_count: u32,
    pub collided_count: u32,
    /// `|Ω|`.
    pub actual_relevant_count: u32,
    pub frames: Vec<FrameStat>,
}

impl RoundOutcome {
    pub fn mean_device_energy(&self) -> f64 {
        self.per_device_energy.iter().map(|e| e.total).sum::<f64>()
            / self.per_device_energy.len() as f64
    }
}

/// Draws `β ~ g_T` and `s = β + σ_ML·z` for every image and queues those with
/// `s ≥ V_th`. `s` is compared unclamped.
pub fn draw_similarities<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Vec<DeviceState> {
    let sigma = cfg.sigma_ml();
    (0..cfg.device_count as usize)
        .map(|device_id| {
            let records: Vec<ImageRecord> = (0..cfg.images_per_device)
                .map(|_| {
                    let beta = cfg.truth_distribution.sample(rng);
                    let z: f64 = rng.sample(StandardNormal);
                    ImageRecord::new(beta, beta + sigma * z, cfg.relevance_threshold, cfg.truth_threshold)
                })
                .collect();
            let queue = records
                .iter()
                .enumerate()
                .filter_map(|(i, r)| r.is_relevant.then_some(i))
                .collect();
            DeviceState {
                device_id,
                records,
                queue,
            }
        })
        .collect()
}

/// Runs frames until all queues are empty (or the configured frame limit is
/// reached). Returns the per-frame statistics; delivery flags are written
/// into the device records.
pub fn contend<R: Rng + ?Sized>(
    devices: &mut [DeviceState],
    slots: u32,
    frame_limit: Option<u32>,
    rng: &mut R,
) -> Vec<FrameStat> {
    let limit = frame_limit.unwrap_or(u32::MAX);
    let mut frames = Vec::new();
    // (slot, device, image)
    let mut attempts: Vec<(u32, usize, usize)> = Vec::with_capacity(devices.len());

    while (frames.len() as u32) < limit && devices.iter().any(|d| !d.queue.is_empty()) {
        attempts.clear();
        for (d, dev) in devices.iter_mut().enumerate() {
            if dev.queue.is_empty() {
                continue;
            }
            let pick = rng.random_range(0..dev.queue.len());
            let image = dev.queue.swap_remove(pick);
            let slot = rng.random_range(0..slots);
            attempts.push((slot, d, image));
        }
        attempts.sort_unstable();

        let mut delivered = 0;
        let mut i = 0;
        while i < attempts.len() {
            let mut j = i + 1;
            while j < attempts.len() && attempts[j].0 == attempts[i].0 {
                j += 1;
            }
            if j - i == 1 {
                let (_, d, image) = attempts[i];
                devices[d].records[image].delivered = true;
                delivered += 1;
            }
            i = j;
        }
        frames.push(FrameStat {
            active: attempts.len() as u32,
            delivered,
        });
    }
    frames
}

pub fn run_round_with_rng<R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Result<RoundOutcome> {
    let mut devices = draw_similarities(cfg, rng);
    let relevant_counts: Vec<u32> = devices.iter().map(|d| d.queue.len() as u32).collect();
    let frames = contend(&mut devices, cfg.slots(), cfg.frame_limit, rng);

    let per_device_energy = devices
        .iter()
        .zip(&relevant_counts)
        .map(|(d, &s)| device_energy(cfg, s, s - d.queue.len() as u32))
        .collect::<Result<Vec<_>>>()?;

    let distance = fidelity_distance(cfg.compression_rate)?;
    let sifi = sifi_with_distance(devices.iter().flat_map(|d| &d.records), cfg.penalty, distance);

    let attempted: u32 = frames.iter().map(|f| f.active).sum();
    let delivered_count: u32 = frames.iter().map(|f| f.delivered).sum();
    let actual_relevant_count = devices
        .iter()
        .flat_map(|d| &d.records)
        .filter(|r| r.is_actual_relevant)
        .count() as u32;

    Ok(RoundOutcome {
        sifi,
        per_device_energy,
        relevant_counts,
        frames_used: frames.len() as u32,
        delivered_count,
        collided_count: attempted - delivered_count,
        actual_relevant_count,
        frames,
    })
}

/// One round driven by its own ChaCha8 stream seeded from `seed`.
pub fn run_round(cfg: &ScenarioConfig, seed: u64) -> Result<RoundOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_round_with_rng(cfg, &mut rng)
}

/// Seed of round `index` under master seed `master` (SplitMix64 mixing).
pub fn round_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationSummary {
    pub rounds: u64,
    pub mean_sifi: f64,
    pub sifi_stderr: f64,
    /// Mean per-device total energy.
    pub mean_total_energy: f64,
    /// Standard error of the per-device total energy.
    pub energy_stderr: f64,
    pub mean_delivered: f64,
    pub mean_frames: f64,
}

/// Every round outcome in round order.
pub fn simulate_rounds(
    cfg: &ScenarioConfig,
    rounds: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<RoundOutcome>> {
    par::map_indexed(rounds as usize, exec, |i| run_round(cfg, round_seed(seed, i as u64)))
        .into_iter()
        .collect()
}

/// Aggregates outcomes in slice order.
pub fn summarize(outcomes: &[RoundOutcome]) -> SimulationSummary {
    let n = outcomes.len() as f64;
    let mut sifi = Welford::default();
    let mut energy = Welford::default();
    let mut delivered = 0.0;
    let mut frames = 0.0;
    for o in outcomes {
        sifi.push(o.sifi);
        for e in &o.per_device_energy {
            energy.push(e.total);
        }
        delivered += f64::from(o.delivered_count);
        frames += f64::from(o.frames_used);
    }
    SimulationSummary {
        rounds: outcomes.len() as u64,
        mean_sifi: sifi.mean,
        sifi_stderr: sifi.stderr(),
        mean_total_energy: energy.mean,
        energy_stderr: energy.stderr(),
        mean_delivered: delivered / n,
        mean_frames: frames / n,
    }
}

pub fn simulate(cfg: &ScenarioConfig, rounds: u64, seed: u64) -> Result<SimulationSummary> {
    simulate_with(cfg, rounds, seed, Execution::Parallel)
}

pub fn simulate_with(
    cfg: &ScenarioConfig,
    rounds: u64,
    seed: u64,
    exec: Execution,
) -> Result<SimulationSummary> {
    cfg.validate()?;
    Ok(summarize(&simulate_rounds(cfg, rounds.max(1), seed, exec)?))
}

#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy;

    fn small(k: u32, n: u32, l: u32) -> ScenarioConfig {
        ScenarioConfig {
            device_count: k,
            images_per_device: n,
            slots_per_frame: Some(l),
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn noiseless_scores_equal_truth() {
        let mut cfg = small(3, 50, 4);
        cfg.model_noise = Some(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in draw_similarities(&cfg, &mut rng) {
            for r in &d.records {
                assert_eq!(r.true_similarity, r.observed_similarity);
            }
        }
    }

    #[test]
    fn zero_threshold_with_tiny_noise_keeps_everything() {
        let mut cfg = small(3, 200, 4);
        cfg.relevance_threshold = 0.0;
        cfg.model_noise = Some(1e-9);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // β = 0 exactly has probability zero under the uniform sampler, and
        // the smallest draws are far above 1e-9 * a few sigma.
        for d in draw_similarities(&cfg, &mut rng) {
            assert_eq!(d.queue.len(), 200);
        }
    }

    #[test]
    fn single_device_delivers_everything() {
        let mut cfg = small(1, 30, 1);
        cfg.truth_threshold = 0.0;
        cfg.relevance_threshold = 0.0;
        cfg.model_noise = Some(0.0);
        let out = run_round(&cfg, 9).unwrap();
        assert_eq!(out.delivered_count, 30);
        assert_eq!(out.collided_count, 0);
        let k = fidelity_distance(cfg.compression_rate).unwrap();
        assert!((out.sifi - (1.0 - k)).abs() < 1e-12);
    }

    #[test]
    fn conservation_and_frame_count() {
        let cfg = small(5, 40, 3);
        for seed in 0..50 {
            let out = run_round(&cfg, seed).unwrap();
            let total: u32 = out.relevant_counts.iter().sum();
            assert_eq!(out.delivered_count + out.collided_count, total);
            assert_eq!(out.frames_used, *out.relevant_counts.iter().max().unwrap());
            for (f, stat) in out.frames.iter().enumerate() {
                let still = out.relevant_counts.iter().filter(|&&s| s as usize > f).count() as u32;
                assert_eq!(stat.active, still);
                assert!(stat.delivered <= stat.active);
            }
        }
    }

    #[test]
    fn frame_limit_truncates() {
        let mut cfg = small(4, 40, 3);
        cfg.frame_limit = Some(2);
        let out = run_round(&cfg, 3).unwrap();
        assert!(out.frames_used <= 2);
        let attempted = out.delivered_count + out.collided_count;
        assert!(attempted <= 8);
    }

    #[test]
    fn energies_follow_relevant_counts() {
        let cfg = small(3, 20, 4);
        let out = run_round(&cfg, 11).unwrap();
        for (e, &s) in out.per_device_energy.iter().zip(&out.relevant_counts) {
            let c = energy::computation_energy(&cfg, s).unwrap();
            let m = energy::communication_energy(&cfg, s);
            assert_eq!(e.computation, c);
            assert_eq!(e.communication, m);
            assert_eq!(e.total, c + m);
        }
    }

    #[test]
    fn seeded_runs_are_reproducible() {
        let cfg = small(4, 30, 5);
        let a = simulate_with(&cfg, 200, 42, Execution::Parallel).unwrap();
        let b = simulate_with(&cfg, 200, 42, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        let one = simulate(&cfg, 1, 42).unwrap();
        let direct = run_round(&cfg, round_seed(42, 0)).unwrap();
        assert_eq!(one.mean_sifi, direct.sifi);
        assert_eq!(one.mean_total_energy, direct.mean_device_energy());
    }

    #[test]
    fn round_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| round_seed(7, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
