//! Expected SiFi over the multinomial distribution of relevant-image counts.
//!
//! A realization `ψ = (q_0, …, q_N)` counts how many of the `K` devices hold
//! exactly `ν` relevant images. Given `ψ`, contention in frame `f` involves the
//! `W_f = Σ_{j ≥ f} q_j` devices that still have something to send, and an
//! image sent in that frame survives with probability `(1 − 1/L)^(W_f − 1)`.

use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::config::{ScenarioConfig, SuccessWeighting};
use crate::energy::{p_rel, pass_mass, scenario_p_th};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::sifi::fidelity_distance;
use crate::truth::TruthDistribution;

/// Device counts per relevant-image count, `q_0..=q_N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Realization(pub Vec<u32>);

impl Realization {
    pub fn new(counts: Vec<u32>) -> Self {
        Self(counts)
    }

    pub fn counts(&self) -> &[u32] {
        &self.0
    }

    /// `N`, the largest representable relevant-image count.
    pub fn max_images(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn devices(&self) -> u64 {
        self.0.iter().map(|&q| u64::from(q)).sum()
    }
}

/// `ln P(X = ψ)` given per-bin log-probabilities. `-∞` when `ψ` is impossible.
pub(crate) fn log_pmf(counts: &[u32], log_prel: &[f64]) -> f64 {
    let k: u64 = counts.iter().map(|&q| u64::from(q)).sum();
    let mut acc = ln_factorial(k);
    for (&q, &lp) in counts.iter().zip(log_prel) {
        if q == 0 {
            continue;
        }
        if lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        acc += f64::from(q) * lp - ln_factorial(u64::from(q));
    }
    acc
}

fn log_prel_table(images: u32, p_th: f64) -> Result<Vec<f64>> {
    (0..=images)
        .map(|nu| p_rel(nu, images, p_th).map(f64::ln))
        .collect()
}

/// Multinomial probability of `ψ` when each of `devices` devices
/// independently has `ν` relevant images with probability `P_Rel(ν)`.
pub fn realization_pmf(psi: &Realization, images: u32, devices: u32, p_th: f64) -> Result<f64> {
    if psi.0.len() != images as usize + 1 || psi.devices() != u64::from(devices) {
        return Ok(0.0);
    }
    let table = log_prel_table(images, p_th)?;
    Ok(log_pmf(&psi.0, &table).exp())
}

/// `W_f`: devices still transmitting in frame `f` (1-based).
pub fn active_devices(psi: &Realization, frame: usize) -> Result<u32> {
    let n = psi.max_images();
    if frame < 1 || frame > n {
        return Err(Error::FrameOutOfRange { frame, max: n });
    }
    Ok(psi.0[frame..].iter().sum())
}

/// `n_w`: frames needed to drain every queue, i.e. the largest `ν` with `q_ν > 0`.
pub fn frames_needed(psi: &Realization) -> usize {
    psi.0.iter().rposition(|&q| q > 0).unwrap_or(0)
}

/// Frame-averaged success probability of a transmitted image, `P_s(ψ)`.
pub fn success_probability(psi: &Realization, slots: u32) -> f64 {
    success_probability_counts(&psi.0, slots, SuccessWeighting::Frame)
}

/// Success probability of a transmitted image with each frame weighted by
/// its `W_f` transmissions.
pub fn success_probability_image_weighted(psi: &Realization, slots: u32) -> f64 {
    success_probability_counts(&psi.0, slots, SuccessWeighting::Image)
}

pub(crate) fn success_probability_counts(counts: &[u32], slots: u32, weighting: SuccessWeighting) -> f64 {
    let frames = counts.iter().rposition(|&q| q > 0).unwrap_or(0);
    if frames == 0 {
        return 1.0;
    }
    let keep = 1.0 - 1.0 / f64::from(slots);
    let mut active = 0u32;
    let mut sum = 0.0;
    let mut weight = 0.0;
    for f in (1..=frames).rev() {
        active += counts[f];
        let w = match weighting {
            SuccessWeighting::Frame => 1.0,
            SuccessWeighting::Image => f64::from(active),
        };
        sum += w * keep.powi(active as i32 - 1);
        weight += w;
    }
    sum / weight
}

/// `P_δ`: probability that an image is actually relevant.
pub fn p_delta(truth_threshold: f64, g: &TruthDistribution) -> f64 {
    1.0 - g.cdf(truth_threshold)
}

/// Probability that an actually relevant image passes the device filter.
pub fn filter_pass_given_actual(cfg: &ScenarioConfig) -> Result<f64> {
    let pd = p_delta(cfg.truth_threshold, &cfg.truth_distribution);
    if pd <= 0.0 {
        return Err(Error::ZeroActualRelevance);
    }
    let mass = pass_mass(
        cfg.relevance_threshold,
        cfg.sigma_ml(),
        &cfg.truth_distribution,
        cfg.truth_threshold,
    )?;
    Ok((mass / pd).clamp(0.0, 1.0))
}

/// `P_A(ψ)`: probability of collecting a given actually relevant image.
pub fn p_actual_collect(psi: &Realization, cfg: &ScenarioConfig) -> Result<f64> {
    let ps = success_probability_counts(&psi.0, cfg.slots(), cfg.analysis.success_weighting);
    Ok(ps * filter_pass_given_actual(cfg)?)
}

/// Expected per-image score `(1 − k_d) P_A + (1 − P_A)(1 − Γ)`.
pub fn expected_z(p_collect: f64, distance: f64, penalty: f64) -> f64 {
    (1.0 - distance) * p_collect + (1.0 - p_collect) * (1.0 - penalty)
}

/// Everything about a scenario the SiFi expectation needs, precomputed once.
#[derive(Debug, Clone)]
pub struct SifiModel {
    pub devices: u32,
    pub images: u32,
    pub slots: u32,
    pub p_th: f64,
    pub p_delta: f64,
    /// `P(|Ω| ≥ 1) = 1 − (1 − P_δ)^(K N)`.
    pub p_omega: f64,
    /// Filter pass probability given actual relevance; zero when `P_δ = 0`.
    pub pass_given_actual: f64,
    pub distance: f64,
    pub penalty: f64,
    pub weighting: SuccessWeighting,
    /// `ln P_Rel(ν)` for `ν = 0..=N`.
    pub log_prel: Vec<f64>,
}

impl SifiModel {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let p_th = scenario_p_th(cfg)?;
        let p_delta = p_delta(cfg.truth_threshold, &cfg.truth_distribution);
        let pass_given_actual = if p_delta > 0.0 {
            filter_pass_given_actual(cfg)?
        } else {
            0.0
        };
        let images_total = f64::from(cfg.device_count) * f64::from(cfg.images_per_device);
        let p_omega = -((images_total * (-p_delta).ln_1p()).exp_m1());
        Ok(Self {
            devices: cfg.device_count,
            images: cfg.images_per_device,
            slots: cfg.slots(),
            p_th,
            p_delta,
            p_omega,
            pass_given_actual,
            distance: fidelity_distance(cfg.compression_rate)?,
            penalty: cfg.penalty,
            weighting: cfg.analysis.success_weighting,
            log_prel: log_prel_table(cfg.images_per_device, p_th)?,
        })
    }

    /// Same scenario with a different slot count; the relevance statistics
    /// do not depend on `L`.
    pub fn with_slots(&self, slots: u32, distance: f64) -> Self {
        Self {
            slots,
            distance,
            ..self.clone()
        }
    }

    /// Expected SiFi conditioned on the realization, `P_Ω E[Z] + 1 − P_Ω`.
    pub fn state_value(&self, counts: &[u32]) -> f64 {
        if self.p_omega == 0.0 {
            return 1.0;
        }
        let collect = success_probability_counts(counts, self.slots, self.weighting) * self.pass_given_actual;
        let z = expected_z(collect, self.distance, self.penalty);
        self.p_omega * z + (1.0 - self.p_omega)
    }

    pub fn log_pmf(&self, counts: &[u32]) -> f64 {
        log_pmf(counts, &self.log_prel)
    }
}

/// Number of compositions of `devices` into `images + 1` bins.
pub fn composition_count(devices: u32, images: u32) -> f64 {
    ln_binomial(u64::from(devices) + u64::from(images), u64::from(images))
        .exp()
        .round()
}

/// Walks every composition of `total` into `bins` nonnegative parts in
/// reverse-lexicographic order, starting from `(total, 0, …, 0)`.
#[derive(Debug, Clone)]
pub struct Compositions {
    parts: Vec<u32>,
    started: bool,
    done: bool,
}

impl Compositions {
    pub fn new(total: u32, bins: usize) -> Self {
        let mut parts = vec![0; bins];
        let done = bins == 0 && total > 0;
        if let Some(first) = parts.first_mut() {
            *first = total;
        }
        Self {
            parts,
            started: false,
            done,
        }
    }

    /// Next composition, or `None` once all have been produced.
    pub fn advance(&mut self) -> Option<&[u32]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.parts);
        }
        let m = self.parts.len();
        if m < 2 {
            self.done = true;
            return None;
        }
        let Some(i) = self.parts[..m - 1].iter().rposition(|&q| q > 0) else {
            self.done = true;
            return None;
        };
        let tail = self.parts[m - 1];
        self.parts[m - 1] = 0;
        self.parts[i] -= 1;
        self.parts[i + 1] = tail + 1;
        Some(&self.parts)
    }
}

/// Exact expected SiFi by enumerating every realization.
pub fn expected_sifi_exact(cfg: &ScenarioConfig) -> Result<f64> {
    expected_sifi_exact_with(cfg, Execution::Parallel)
}

pub fn expected_sifi_exact_with(cfg: &ScenarioConfig, exec: Execution) -> Result<f64> {
    let model = SifiModel::new(cfg)?;
    let count = composition_count(model.devices, model.images);
    let budget = cfg.analysis.enumeration_budget;
    if count > budget as f64 {
        return Err(Error::BudgetExceeded {
            compositions: count,
            budget,
        });
    }
    Ok(exact_from_model(&model, exec))
}

/// Chunked over `q_0`; each chunk sums sequentially and chunks are reduced
/// in order, so the result is independent of the thread count.
pub fn exact_from_model(model: &SifiModel, exec: Execution) -> f64 {
    if model.p_omega == 0.0 {
        return 1.0;
    }
    let k = model.devices;
    let bins = model.images as usize + 1;
    let partials = par::map_indexed(k as usize + 1, exec, |q0| {
        let q0 = q0 as u32;
        let mut counts = vec![0u32; bins];
        counts[0] = q0;
        let mut sum = 0.0;
        let mut rest = Compositions::new(k - q0, bins - 1);
        while let Some(tail) = rest.advance() {
            counts[1..].copy_from_slice(tail);
            let lp = model.log_pmf(&counts);
            if lp == f64::NEG_INFINITY {
                continue;
            }
            sum += lp.exp() * model.state_value(&counts);
        }
        sum
    });
    partials.into_iter().sum::<f64>().clamp(0.0, 1.0)
}
