//! Scenario configuration: every protocol, radio, hardware and statistical
//! parameter of one experiment.
//!
//! Configurations are TOML documents. Missing keys take the default scenario
//! (five devices with 100 images each, 640×480 RGB images, 100 kbps links).
//! Overrides use dotted field paths, e.g. `radio.tx_power=0.2`.

use serde::{Deserialize, Serialize};

use crate::error::{out_of_range, Error, Result};
use crate::hardware::{HardwareProfile, ModelCost};
use crate::truth::TruthDistribution;

/// Average bits per pixel of a PNG-compressed image.
pub const PNG_BITS_PER_PIXEL: f64 = 4.86;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageGeometry {
    pub channels: u32,
    pub height: u32,
    pub width: u32,
}

impl ImageGeometry {
    /// `M_C · M_H · M_W`.
    pub fn elements(&self) -> f64 {
        f64::from(self.channels) * f64::from(self.height) * f64::from(self.width)
    }

    /// `M_H · M_W`.
    pub fn pixels(&self) -> f64 {
        f64::from(self.height) * f64::from(self.width)
    }
}

impl Default for ImageGeometry {
    fn default() -> Self {
        Self {
            channels: 3,
            height: 640,
            width: 480,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioProfile {
    /// Transmit power `ξ_T` in watts.
    pub tx_power: f64,
    /// Receive power `ξ_R` in watts.
    pub rx_power: f64,
    /// Up- and downlink rate `R` in bits per second.
    pub rate: f64,
    /// Slot duration in seconds. Not used by any energy formula.
    pub slot_duration: f64,
}

impl Default for RadioProfile {
    fn default() -> Self {
        Self {
            tx_power: 0.108,
            rx_power: 0.0669,
            rate: 1e5,
            slot_duration: 1e-3,
        }
    }
}

/// How the energy of loading both models into SRAM is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoadTermMode {
    /// Each model's weights use that model's own DRAM access energy and `b_q`.
    #[default]
    PerModel,
    /// Both models' weights use the behavior model's DRAM access energy and `b_q`.
    Shared,
}

/// Metropolis acceptance rule for the realization chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcceptanceRule {
    /// Accept with probability `min(1, P(Y') / P(Y))`.
    #[default]
    Metropolis,
    /// Additionally corrects for the asymmetric proposal (occupied-bin counts).
    Hastings,
}

/// How per-frame success factors are averaged into `P_s(ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SuccessWeighting {
    /// Plain mean over the `n_w` frames.
    #[default]
    Frame,
    /// Each frame weighted by its number of transmissions `W_f`, which is
    /// the per-image delivery rate the simulator measures.
    Image,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub acceptance: AcceptanceRule,
    pub success_weighting: SuccessWeighting,
    /// Chain steps discarded before averaging.
    pub burn_in: u64,
    /// Largest number of compositions the exact evaluator will enumerate.
    pub enumeration_budget: u64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            acceptance: AcceptanceRule::Metropolis,
            success_weighting: SuccessWeighting::Frame,
            burn_in: 0,
            enumeration_budget: 10_000_000,
        }
    }
}

/// Which terms enter the comparison schemes' energy models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineOptions {
    /// Bits per pixel of the PNG images sent by the baseline and TinyAirNet.
    pub png_rate: f64,
    /// Baseline devices pay for receiving the query vector.
    pub baseline_query_reception: bool,
    /// TinyAirNet devices pay for receiving the behavior model and query.
    pub tinyairnet_reception: bool,
    /// TinyAirNet devices pay for loading the behavior model into SRAM.
    pub tinyairnet_model_load: bool,
    /// TinyAirNet devices pay one behavior-model inference per image.
    pub tinyairnet_inference: bool,
    /// In scheme comparisons, run TinyAirNet at EcoPull's optimized `V_th`
    /// instead of the configured one.
    pub tinyairnet_follows_optimum: bool,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        Self {
            png_rate: PNG_BITS_PER_PIXEL,
            baseline_query_reception: false,
            tinyairnet_reception: true,
            tinyairnet_model_load: true,
            tinyairnet_inference: true,
            tinyairnet_follows_optimum: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// `K`.
    pub device_count: u32,
    /// `N`, identical across devices.
    pub images_per_device: u32,
    /// `V_th`: an image is relevant when its observed similarity reaches it.
    pub relevance_threshold: f64,
    /// `δ`: an image is actually relevant when its true similarity reaches it.
    pub truth_threshold: f64,
    /// `r` in bits per pixel.
    pub compression_rate: f64,
    /// Explicit `L`. Takes precedence over `slot_coefficient`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slots_per_frame: Option<u32>,
    /// `c_L` in `L = c_L · ⌈r_max / r⌉`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot_coefficient: Option<u32>,
    /// `Γ`: SiFi penalty for an actually relevant image that is not delivered.
    pub penalty: f64,
    /// `b_B`: bits per behavior-model weight on the downlink.
    pub behavior_weight_bits: u32,
    /// `σ_ML`; `1 / b_B` when omitted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_noise: Option<f64>,
    /// `M`: dimension of the query feature vector.
    pub query_length: u32,
    /// Stop after this many frames instead of draining every queue.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_limit: Option<u32>,
    pub load_term: LoadTermMode,
    pub radio: RadioProfile,
    pub image: ImageGeometry,
    pub behavior_hw: HardwareProfile,
    pub compressor_hw: HardwareProfile,
    pub behavior_model: ModelCost,
    pub compressor_model: ModelCost,
    pub truth_distribution: TruthDistribution,
    pub analysis: AnalysisOptions,
    pub baselines: BaselineOptions,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            device_count: 5,
            images_per_device: 100,
            relevance_threshold: 0.6,
            truth_threshold: 0.9,
            compression_rate: 2.0,
            slots_per_frame: None,
            slot_coefficient: Some(5),
            penalty: 1.0,
            behavior_weight_bits: 8,
            model_noise: None,
            query_length: 512,
            frame_limit: None,
            load_term: LoadTermMode::PerModel,
            radio: RadioProfile::default(),
            image: ImageGeometry::default(),
            behavior_hw: HardwareProfile::new(16, 8, 16),
            compressor_hw: HardwareProfile::new(16, 16, 16),
            behavior_model: ModelCost {
                complexity: 117e6,
                weights: 0.976e6,
                activations: 4.309e6,
            },
            compressor_model: ModelCost {
                complexity: 477e6,
                weights: 0.0184e6,
                activations: 3.54e6,
            },
            truth_distribution: TruthDistribution::Uniform,
            analysis: AnalysisOptions::default(),
            baselines: BaselineOptions::default(),
        }
    }
}

/// `c_L · ⌈r_max / r⌉` with `r_max` the PNG rate.
pub fn slots_for_rate(rate: f64, coefficient: u32) -> u32 {
    slots_for_rate_with(rate, coefficient, PNG_BITS_PER_PIXEL)
}

pub fn slots_for_rate_with(rate: f64, coefficient: u32, png_rate: f64) -> u32 {
    // Guard against ratios like 4.86 / 1.215 landing one ulp above an integer.
    let ratio = png_rate / rate;
    let ceil = (ratio - 1e-9 * ratio.max(1.0)).ceil().max(1.0);
    coefficient * ceil as u32
}

impl ScenarioConfig {
    /// `σ_ML`, defaulting to `1 / b_B`.
    pub fn sigma_ml(&self) -> f64 {
        self.model_noise
            .unwrap_or_else(|| 1.0 / f64::from(self.behavior_weight_bits))
    }

    /// Effective slots per frame `L`.
    pub fn slots(&self) -> u32 {
        match (self.slots_per_frame, self.slot_coefficient) {
            (Some(l), _) => l,
            (None, Some(c)) => slots_for_rate_with(self.compression_rate, c, self.baselines.png_rate),
            (None, None) => 1,
        }
    }

    /// Packet size `b_p = r · M_H · M_W` bits.
    pub fn packet_bits(&self) -> f64 {
        packet_bits(self.compression_rate, &self.image)
    }

    /// Same scenario with a different `(V_th, r)` operating point.
    pub fn with_operating_point(&self, relevance_threshold: f64, compression_rate: f64) -> Self {
        Self {
            relevance_threshold,
            compression_rate,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.device_count < 1 {
            return Err(out_of_range("device_count", self.device_count, ">= 1"));
        }
        if self.images_per_device < 1 {
            return Err(out_of_range("images_per_device", self.images_per_device, ">= 1"));
        }
        for (field, v) in [
            ("relevance_threshold", self.relevance_threshold),
            ("truth_threshold", self.truth_threshold),
            ("penalty", self.penalty),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(out_of_range(field, v, "[0, 1]"));
            }
        }
        if !(self.compression_rate > 0.0 && self.compression_rate.is_finite()) {
            return Err(out_of_range("compression_rate", self.compression_rate, "> 0"));
        }
        if self.slots_per_frame.is_none() && self.slot_coefficient.is_none() {
            return Err(Error::Parse(
                "one of `slots_per_frame` or `slot_coefficient` is required".into(),
            ));
        }
        if self.slots_per_frame == Some(0) {
            return Err(out_of_range("slots_per_frame", 0, ">= 1"));
        }
        if self.slot_coefficient == Some(0) {
            return Err(out_of_range("slot_coefficient", 0, ">= 1"));
        }
        if self.behavior_weight_bits == 0 {
            return Err(out_of_range("behavior_weight_bits", 0, ">= 1"));
        }
        let sigma = self.sigma_ml();
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(out_of_range("model_noise", sigma, ">= 0"));
        }
        if self.frame_limit == Some(0) {
            return Err(out_of_range("frame_limit", 0, ">= 1"));
        }
        for (field, v) in [
            ("radio.tx_power", self.radio.tx_power),
            ("radio.rx_power", self.radio.rx_power),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(out_of_range(field, v, ">= 0"));
            }
        }
        for (field, v) in [
            ("radio.rate", self.radio.rate),
            ("radio.slot_duration", self.radio.slot_duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(out_of_range(field, v, "> 0"));
            }
        }
        for (field, v) in [
            ("image.channels", self.image.channels),
            ("image.height", self.image.height),
            ("image.width", self.image.width),
        ] {
            if v == 0 {
                return Err(out_of_range(field, v, ">= 1"));
            }
        }
        self.behavior_hw.validate("behavior_hw")?;
        self.compressor_hw.validate("compressor_hw")?;
        self.behavior_model.validate("behavior_model")?;
        self.compressor_model.validate("compressor_model")?;
        self.truth_distribution.validate()?;
        if !(self.baselines.png_rate > 0.0 && self.baselines.png_rate.is_finite()) {
            return Err(out_of_range("baselines.png_rate", self.baselines.png_rate, "> 0"));
        }
        Ok(())
    }

    /// Applies `path=value` overrides to a copy of this configuration.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = toml::Table::try_from(self).expect("configuration serializes to a table");
        apply_overrides(&mut doc, overrides)?;
        let cfg: ScenarioConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }
}

/// `b_p = r · M_H · M_W`: bits of one compressed image, headers ignored.
pub fn packet_bits(rate: f64, image: &ImageGeometry) -> f64 {
    rate * image.pixels()
}

/// Parses and validates a configuration document. An empty document yields
/// the default scenario.
pub fn load_config(source: &str) -> Result<ScenarioConfig> {
    load_config_with_overrides(source, &[])
}

/// Like [`load_config`], with `path=value` overrides applied on top of the
/// document before validation. Values are parsed as TOML scalars, falling
/// back to a bare string.
pub fn load_config_with_overrides(source: &str, overrides: &[String]) -> Result<ScenarioConfig> {
    let user: toml::Table = source
        .parse()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    // Partial sections inherit the remaining keys from the default scenario.
    let mut doc = toml::Table::try_from(ScenarioConfig::default())
        .expect("default configuration serializes to a table");
    merge(&mut doc, user);
    apply_overrides(&mut doc, overrides)?;
    let cfg: ScenarioConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

fn apply_overrides(doc: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for item in overrides {
        let (path, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("override `{item}` is not of the form path=value")))?;
        set_path(doc, path.trim(), parse_scalar(raw.trim()))?;
    }
    Ok(())
}

fn merge(base: &mut toml::Table, top: toml::Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

fn parse_scalar(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<()> {
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| Error::Parse(format!("empty override path `{path}`")))?;
    let mut table = doc;
    for key in keys {
        let entry = table
            .entry(key.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Parse(format!("`{key}` in `{path}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
#[allow(clippy::field_reassign_with_default)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_default_scenario() {
        let cfg = load_config("").unwrap();
        assert_eq!(cfg.device_count, 5);
        assert_eq!(cfg.images_per_device, 100);
        assert_eq!(cfg.truth_threshold, 0.9);
        assert_eq!(cfg.radio.tx_power, 0.108);
        assert_eq!(cfg.radio.rx_power, 0.0669);
        assert_eq!(cfg.radio.rate, 1e5);
        assert_eq!(cfg.penalty, 1.0);
        assert_eq!(cfg.sigma_ml(), 0.125);
        assert_eq!(cfg, ScenarioConfig::default());
    }

    #[test]
    fn out_of_range_threshold_names_the_field() {
        let err = load_config("relevance_threshold = 1.5").unwrap_err();
        match err {
            Error::OutOfRange { field, .. } => assert_eq!(field, "relevance_threshold"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn noise_follows_behavior_bits_unless_set() {
        let cfg = load_config("behavior_weight_bits = 4").unwrap();
        assert_eq!(cfg.sigma_ml(), 0.25);
        let cfg = load_config("behavior_weight_bits = 4\nmodel_noise = 0.05").unwrap();
        assert_eq!(cfg.sigma_ml(), 0.05);
    }

    #[test]
    fn malformed_and_unknown_keys_are_rejected() {
        assert!(matches!(load_config("device_count = "), Err(Error::Parse(_))));
        assert!(matches!(load_config("devices = 3"), Err(Error::Parse(_))));
        assert!(matches!(load_config("[radio]\ntx = 1.0"), Err(Error::Parse(_))));
    }

    #[test]
    fn dotted_overrides_reach_nested_fields() {
        let cfg = load_config_with_overrides(
            "[radio]\nrate = 2e5",
            &["radio.tx_power=0.2".into(), "device_count=3".into(), "truth_distribution.kind=uniform".into()],
        )
        .unwrap();
        assert_eq!(cfg.radio.tx_power, 0.2);
        assert_eq!(cfg.radio.rate, 2e5);
        assert_eq!(cfg.radio.rx_power, 0.0669);
        assert_eq!(cfg.device_count, 3);
        let cfg = load_config("[compressor_hw]\nparallelism = 32").unwrap();
        assert_eq!(cfg.compressor_hw.sram_bits, 16);
        assert_eq!(cfg.compressor_hw.parallelism(), 32.0);
        assert!(load_config_with_overrides("", &["device_count".into()]).is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = ScenarioConfig::default();
        cfg.slots_per_frame = Some(7);
        cfg.model_noise = Some(0.0625);
        cfg.truth_distribution = TruthDistribution::Beta { alpha: 2.0, beta: 3.5 };
        cfg.analysis.acceptance = AcceptanceRule::Hastings;
        cfg.behavior_hw = cfg.behavior_hw.with_parallelism(100);
        let back = load_config(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn packet_bits_from_rate() {
        let img = ImageGeometry::default();
        assert_eq!(packet_bits(2.0, &img), 614_400.0);
        assert!((packet_bits(4.86, &img) - 1_492_992.0).abs() < 1e-6);
        let zero = load_config("compression_rate = 0.0").unwrap_err();
        assert!(matches!(zero, Error::OutOfRange { .. }));
    }

    #[test]
    fn slots_from_coefficient() {
        assert_eq!(slots_for_rate(1.2, 5), 25);
        assert_eq!(slots_for_rate(4.86, 5), 5);
        assert_eq!(slots_for_rate(2.5, 2), 4);
        assert_eq!(slots_for_rate(1.215, 1), 4);
        let cfg = load_config("compression_rate = 1.2\nslot_coefficient = 5").unwrap();
        assert_eq!(cfg.slots(), 25);
        let cfg = load_config("slots_per_frame = 3").unwrap();
        assert_eq!(cfg.slots(), 3);
    }
}
