//! Energy of the two comparison schemes and the energy-saving ratio.
//!
//! * Baseline: every image is PNG-compressed and sent in a reserved slot. No
//!   model is received, loaded or run.
//! * TinyAirNet: behavior-model filtering as in EcoPull, but relevant images
//!   are sent as PNG instead of latents.
//!
//! Which overhead terms each scheme pays is controlled by
//! [`BaselineOptions`](crate::config::BaselineOptions).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::energy::{
    behavior_inference_energy, behavior_load_energy, expected_total_energy, query_bits,
    reception_energy, scenario_p_th,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    EcoPull,
    TinyAirNet,
    Baseline,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [SchemeKind::EcoPull, SchemeKind::TinyAirNet, SchemeKind::Baseline];
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchemeKind::EcoPull => "ecopull",
            SchemeKind::TinyAirNet => "tinyairnet",
            SchemeKind::Baseline => "baseline",
        })
    }
}

/// Energy to send one PNG image.
pub fn png_transmit_energy(cfg: &ScenarioConfig) -> f64 {
    cfg.radio.tx_power * cfg.baselines.png_rate * cfg.image.pixels() / cfg.radio.rate
}

pub fn baseline_energy(cfg: &ScenarioConfig) -> f64 {
    let query = if cfg.baselines.baseline_query_reception {
        cfg.radio.rx_power * query_bits(cfg) / cfg.radio.rate
    } else {
        0.0
    };
    f64::from(cfg.images_per_device) * png_transmit_energy(cfg) + query
}

/// Expected per-device TinyAirNet energy at the configured `V_th`.
pub fn tinyairnet_energy(cfg: &ScenarioConfig) -> Result<f64> {
    let opts = &cfg.baselines;
    let n = f64::from(cfg.images_per_device);
    let p = scenario_p_th(cfg)?;

    let mut total = n * p * png_transmit_energy(cfg);
    if opts.tinyairnet_inference {
        total += n * behavior_inference_energy(cfg);
    }
    if opts.tinyairnet_model_load {
        total += behavior_load_energy(cfg);
    }
    if opts.tinyairnet_reception {
        total += reception_energy(cfg);
    }
    Ok(total)
}

pub fn scheme_energy(kind: SchemeKind, cfg: &ScenarioConfig) -> Result<f64> {
    match kind {
        SchemeKind::EcoPull => expected_total_energy(cfg),
        SchemeKind::TinyAirNet => tinyairnet_energy(cfg),
        SchemeKind::Baseline => Ok(baseline_energy(cfg)),
    }
}

/// `η = E_scheme / E_baseline`; below one means the scheme saves energy.
pub fn energy_saving_ratio(scheme_energy: f64, baseline_energy: f64) -> Result<f64> {
    if baseline_energy.is_nan() || baseline_energy <= 0.0 {
        return Err(Error::ZeroBaseline(baseline_energy));
    }
    Ok(scheme_energy / baseline_energy)
}

/// Human-readable list of the active comparison-scheme assumptions.
pub fn describe_assumptions(cfg: &ScenarioConfig) -> Vec<String> {
    let o = &cfg.baselines;
    vec![
        format!("png_rate_bpp={}", o.png_rate),
        format!("baseline_query_reception={}", o.baseline_query_reception),
        format!("tinyairnet_reception={}", o.tinyairnet_reception),
        format!("tinyairnet_model_load={}", o.tinyairnet_model_load),
        format!("tinyairnet_inference={}", o.tinyairnet_inference),
        format!("tinyairnet_follows_optimum={}", o.tinyairnet_follows_optimum),
        format!("load_term={:?}", cfg.load_term),
    ]
}
