//! Per-inference energy of a CNN on fixed-point hardware with an off-chip
//! DRAM, a main SRAM, a local SRAM and a parallel MUAC array.
//!
//! All returned energies are in joules. The picojoule constants below are the
//! per-operation costs of a 16-bit MUAC and of one DRAM access.

use serde::{Deserialize, Serialize};

use crate::config::ImageGeometry;
use crate::error::{out_of_range, Result};

const PICO: f64 = 1e-12;
const MUAC_REFERENCE_PJ: f64 = 3.7;
const MUAC_EXPONENT: f64 = 1.25;
const DRAM_ACCESS_FACTOR: f64 = 128.0;
const DEFAULT_ARRAY_SIZE: u32 = 64;

/// Bit widths and parallelism of the inference chip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    /// DRAM precision `b_max`.
    pub full_precision_bits: u32,
    /// SRAM quantization `b_q`.
    pub sram_bits: u32,
    /// MUAC word width `b_MUAC`.
    pub muac_bits: u32,
    /// Number of parallel MUAC units; `64 · b_MUAC / b_q` when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<u32>,
}

impl HardwareProfile {
    pub fn new(full_precision_bits: u32, sram_bits: u32, muac_bits: u32) -> Self {
        Self {
            full_precision_bits,
            sram_bits,
            muac_bits,
            parallelism: None,
        }
    }

    pub fn with_parallelism(mut self, p: u32) -> Self {
        self.parallelism = Some(p);
        self
    }

    /// Effective number of parallel MUAC units.
    pub fn parallelism(&self) -> f64 {
        match self.parallelism {
            Some(p) => f64::from(p),
            None => f64::from(DEFAULT_ARRAY_SIZE) * f64::from(self.muac_bits) / f64::from(self.sram_bits),
        }
    }

    /// Ratio `b_q / b_MUAC`.
    fn bit_ratio(&self) -> f64 {
        f64::from(self.sram_bits) / f64::from(self.muac_bits)
    }

    /// Ratio `b_max / b_q`: DRAM accesses needed per full-precision word.
    pub fn precision_ratio(&self) -> f64 {
        f64::from(self.full_precision_bits) / f64::from(self.sram_bits)
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        for (field, v) in [
            ("full_precision_bits", self.full_precision_bits),
            ("sram_bits", self.sram_bits),
            ("muac_bits", self.muac_bits),
        ] {
            if v == 0 {
                return Err(out_of_range(&format!("{name}.{field}"), v, "> 0"));
            }
        }
        if self.sram_bits > self.full_precision_bits {
            return Err(out_of_range(
                &format!("{name}.sram_bits"),
                self.sram_bits,
                "<= full_precision_bits",
            ));
        }
        if self.parallelism() < 1.0 {
            return Err(out_of_range(
                &format!("{name}.parallelism"),
                self.parallelism(),
                ">= 1",
            ));
        }
        Ok(())
    }
}

/// Size of a TinyML model: MUAC operations, weights and activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelCost {
    /// `U`: MUAC operations per inference.
    pub complexity: f64,
    /// `W`: weights and biases.
    pub weights: f64,
    /// `A`: activations across the network.
    pub activations: f64,
}

impl ModelCost {
    pub const ZERO: ModelCost = ModelCost {
        complexity: 0.0,
        weights: 0.0,
        activations: 0.0,
    };

    pub fn validate(&self, name: &str) -> Result<()> {
        for (field, v) in [
            ("complexity", self.complexity),
            ("weights", self.weights),
            ("activations", self.activations),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(out_of_range(&format!("{name}.{field}"), v, ">= 0"));
            }
        }
        Ok(())
    }
}

/// Energy of one MUAC operation: `3.7 · (b_q / b_MUAC)^1.25` pJ.
pub fn e_muac(hw: &HardwareProfile) -> f64 {
    MUAC_REFERENCE_PJ * hw.bit_ratio().powf(MUAC_EXPONENT) * PICO
}

/// Energy of one `b_q`-bit DRAM access: `128 · 3.7 · (b_q / b_MUAC)` pJ.
pub fn e_dram_access(hw: &HardwareProfile) -> f64 {
    DRAM_ACCESS_FACTOR * MUAC_REFERENCE_PJ * hw.bit_ratio() * PICO
}

/// Term-by-term decomposition of one inference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceBreakdown {
    /// Reading the input from DRAM.
    pub dram: f64,
    /// MUAC computation, `E_C`.
    pub compute: f64,
    /// Weight movement main→local SRAM, `E_W`.
    pub weights: f64,
    /// Activation movement, `E_A`.
    pub activations: f64,
}

impl InferenceBreakdown {
    pub fn hardware(&self) -> f64 {
        self.compute + self.weights + self.activations
    }

    pub fn total(&self) -> f64 {
        self.dram + self.hardware()
    }
}

pub fn inference_breakdown(
    hw: &HardwareProfile,
    model: &ModelCost,
    input: &ImageGeometry,
) -> InferenceBreakdown {
    let muac = e_muac(hw);
    let local = muac;
    let main = 2.0 * muac;
    let reuse = local * model.complexity / hw.parallelism().sqrt();

    InferenceBreakdown {
        dram: e_dram_access(hw) * input.elements() * hw.precision_ratio(),
        compute: muac * (model.complexity + 3.0 * model.activations),
        weights: main * model.weights + reuse,
        activations: 2.0 * main * model.activations + reuse,
    }
}

/// `E_inf = E_DRAM + E_C + E_W + E_A` for one inference on `input`.
pub fn inference_energy(hw: &HardwareProfile, model: &ModelCost, input: &ImageGeometry) -> f64 {
    inference_breakdown(hw, model, input).total()
}

/// Energy to load a model's weights from DRAM into the main SRAM.
pub fn model_load_energy(hw: &HardwareProfile, model: &ModelCost) -> f64 {
    e_dram_access(hw) * model.weights * hw.precision_ratio()
}
