//! Energy and retrieval-quality models for pulling images from IoT devices
//! that filter with a TinyML behavior model and send latents produced by a
//! tiny image compressor over slotted ALOHA.
//!
//! * [`hardware`] and [`energy`]: per-inference and per-device energy.
//! * [`mac`]: Monte Carlo simulation of a pull round.
//! * [`analytic`] and [`mcmc`]: expected SiFi, exact and by Metropolis sampling.
//! * [`baselines`]: comparison schemes and the energy-saving ratio.
//! * [`experiments`]: sweeps, grid-search optimization and scheme comparison.

pub mod analytic;
pub mod baselines;
pub mod config;
pub mod energy;
pub mod error;
pub mod experiments;
pub mod hardware;
pub mod mac;
pub mod mcmc;
pub mod par;
pub mod quadrature;
pub mod report;
pub mod sifi;
pub mod truth;

pub use config::{load_config, load_config_with_overrides, ScenarioConfig};
pub use error::{Error, Result};
pub use par::Execution;
