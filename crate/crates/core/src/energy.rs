//! Per-device energy: computation, communication, and the expectation over the
//! number of relevant images a device finds.

use statrs::function::factorial::ln_binomial;

use crate::config::{LoadTermMode, ScenarioConfig};
use crate::error::{out_of_range, Error, Result};
use crate::hardware::{e_dram_access, inference_energy, model_load_energy};
use crate::quadrature::{self, q_function};
use crate::truth::TruthDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub computation: f64,
    pub communication: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(computation: f64, communication: f64) -> Self {
        Self {
            computation,
            communication,
            total: computation + communication,
        }
    }
}

pub fn behavior_inference_energy(cfg: &ScenarioConfig) -> f64 {
    inference_energy(&cfg.behavior_hw, &cfg.behavior_model, &cfg.image)
}

pub fn compressor_inference_energy(cfg: &ScenarioConfig) -> f64 {
    inference_energy(&cfg.compressor_hw, &cfg.compressor_model, &cfg.image)
}

/// Energy of loading the behavior model alone into SRAM.
pub fn behavior_load_energy(cfg: &ScenarioConfig) -> f64 {
    model_load_energy(&cfg.behavior_hw, &cfg.behavior_model)
}

/// Energy of loading both models from DRAM into the main SRAM.
pub fn model_load_term(cfg: &ScenarioConfig) -> f64 {
    match cfg.load_term {
        LoadTermMode::PerModel => {
            model_load_energy(&cfg.behavior_hw, &cfg.behavior_model)
                + model_load_energy(&cfg.compressor_hw, &cfg.compressor_model)
        }
        LoadTermMode::Shared => {
            let hw = &cfg.behavior_hw;
            e_dram_access(hw)
                * (cfg.behavior_model.weights + cfg.compressor_model.weights)
                * hw.precision_ratio()
        }
    }
}

/// Receiving the behavior model and the query vector: `ξ_R (W_B b_B + M b_q) / R`.
pub fn reception_energy(cfg: &ScenarioConfig) -> f64 {
    let bits = cfg.behavior_model.weights * f64::from(cfg.behavior_weight_bits)
        + query_bits(cfg);
    cfg.radio.rx_power * bits / cfg.radio.rate
}

pub(crate) fn query_bits(cfg: &ScenarioConfig) -> f64 {
    f64::from(cfg.query_length) * f64::from(cfg.behavior_hw.sram_bits)
}

/// Energy to send one compressed image: `ξ_T b_p / R`.
pub fn transmit_energy_per_image(cfg: &ScenarioConfig) -> f64 {
    cfg.radio.tx_power * cfg.packet_bits() / cfg.radio.rate
}

/// Cost attached to each relevant image: compression plus transmission.
pub fn per_relevant_image_energy(cfg: &ScenarioConfig) -> f64 {
    compressor_inference_energy(cfg) + transmit_energy_per_image(cfg)
}

/// Energy every device pays regardless of how many images are relevant.
pub fn fixed_overhead(cfg: &ScenarioConfig) -> f64 {
    f64::from(cfg.images_per_device) * behavior_inference_energy(cfg)
        + model_load_term(cfg)
        + reception_energy(cfg)
}

/// `N E_inf,B + S E_inf,C + load`, for `S` relevant images out of `N`.
pub fn computation_energy(cfg: &ScenarioConfig, relevant: u32) -> Result<f64> {
    if relevant > cfg.images_per_device {
        return Err(Error::CountTooLarge {
            count: relevant.into(),
            images: cfg.images_per_device.into(),
        });
    }
    Ok(f64::from(cfg.images_per_device) * behavior_inference_energy(cfg)
        + f64::from(relevant) * compressor_inference_energy(cfg)
        + model_load_term(cfg))
}

/// Reception of model and query plus `transmitted` uplink packets.
pub fn communication_energy(cfg: &ScenarioConfig, transmitted: u32) -> f64 {
    let rx_bits = cfg.behavior_model.weights * f64::from(cfg.behavior_weight_bits) + query_bits(cfg);
    (cfg.radio.rx_power * rx_bits
        + cfg.radio.tx_power * f64::from(transmitted) * cfg.packet_bits())
        / cfg.radio.rate
}

pub fn device_energy(cfg: &ScenarioConfig, relevant: u32, transmitted: u32) -> Result<EnergyBreakdown> {
    Ok(EnergyBreakdown::new(
        computation_energy(cfg, relevant)?,
        communication_energy(cfg, transmitted),
    ))
}

/// Probability that the noisy similarity `β + w`, `w ~ N(0, σ²)`, reaches
/// `threshold`, integrated over the true-similarity density on `[lower, 1]`.
pub(crate) fn pass_mass(
    threshold: f64,
    sigma: f64,
    g: &TruthDistribution,
    lower: f64,
) -> Result<f64> {
    if sigma == 0.0 {
        // s = β exactly: the pass region is β ≥ threshold.
        return Ok(1.0 - g.cdf(threshold.max(lower)));
    }
    quadrature::integrate(
        |b| q_function((threshold - b) / sigma) * g.density(b),
        lower,
        1.0,
        &[threshold],
        quadrature::DEFAULT_TOLERANCE,
    )
}

/// `P_th`: probability that one image is judged relevant.
pub fn p_th(threshold: f64, sigma: f64, g: &TruthDistribution) -> Result<f64> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(out_of_range("relevance_threshold", threshold, "[0, 1]"));
    }
    if sigma.is_nan() || sigma < 0.0 {
        return Err(out_of_range("model_noise", sigma, ">= 0"));
    }
    Ok(pass_mass(threshold, sigma, g, 0.0)?.clamp(0.0, 1.0))
}

pub fn scenario_p_th(cfg: &ScenarioConfig) -> Result<f64> {
    p_th(cfg.relevance_threshold, cfg.sigma_ml(), &cfg.truth_distribution)
}

/// Binomial probability of `count` successes in `trials` with success
/// probability `p`.
pub fn binomial_pmf(count: u64, trials: u64, p: f64) -> f64 {
    if count > trials {
        return 0.0;
    }
    if p <= 0.0 {
        return if count == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if count == trials { 1.0 } else { 0.0 };
    }
    let k = count as f64;
    let n = trials as f64;
    (ln_binomial(trials, count) + k * p.ln() + (n - k) * (-p).ln_1p()).exp()
}

/// `P_Rel(ν)`: probability that a device holds exactly `ν` relevant images.
pub fn p_rel(nu: u32, images: u32, p_th: f64) -> Result<f64> {
    if nu > images {
        return Err(Error::CountTooLarge {
            count: nu.into(),
            images: images.into(),
        });
    }
    Ok(binomial_pmf(nu.into(), images.into(), p_th))
}

/// Expected per-device energy as an explicit sum over the relevant-image count.
pub fn expected_total_energy(cfg: &ScenarioConfig) -> Result<f64> {
    let p = scenario_p_th(cfg)?;
    let per_image = per_relevant_image_energy(cfg);
    let n = cfg.images_per_device;
    let mut sum = 0.0;
    for nu in 0..=n {
        sum += f64::from(nu) * per_image * p_rel(nu, n, p)?;
    }
    Ok(sum + fixed_overhead(cfg))
}

/// Closed form of [`expected_total_energy`] via the binomial mean `N·P_th`.
pub fn expected_total_energy_closed_form(cfg: &ScenarioConfig) -> Result<f64> {
    let p = scenario_p_th(cfg)?;
    Ok(f64::from(cfg.images_per_device) * p * per_relevant_image_energy(cfg) + fixed_overhead(cfg))
}
