//! Experiment drivers: parameter sweeps of the expected SiFi, the
//! `(V_th, r)` grid search and the scheme comparison over `N`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::analytic::{self, SifiModel};
use crate::baselines::{baseline_energy, energy_saving_ratio, tinyairnet_energy};
use crate::config::ScenarioConfig;
use crate::energy::{expected_total_energy, expected_total_energy_closed_form, scenario_p_th};
use crate::error::{Error, Result};
use crate::mac;
use crate::mcmc::{self, ChainOptions};
use crate::par::{self, Execution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Simulate,
    Exact,
    Mcmc,
}

/// One-dimensional sweep of a configuration field.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// Dotted configuration path, e.g. `compression_rate`.
    pub parameter: String,
    pub grid: Vec<f64>,
    pub base: ScenarioConfig,
    pub modes: Vec<EvalMode>,
    /// Simulation rounds and MCMC samples per grid point.
    pub samples: u64,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidSweep("grid is empty".into()));
        }
        if self.grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSweep("grid values must be finite".into()));
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSweep("grid must be strictly increasing".into()));
        }
        if self.modes.is_empty() {
            return Err(Error::InvalidSweep("no evaluation mode selected".into()));
        }
        Ok(())
    }

    /// The configuration at one grid value.
    pub fn config_at(&self, value: f64) -> Result<ScenarioConfig> {
        self.base.with_overrides(&[format!("{}={}", self.parameter, value)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub slots: u32,
    pub mcmc: Option<f64>,
    pub exact: Option<f64>,
    pub simulated: Option<f64>,
    pub sim_stderr: Option<f64>,
}

/// Evaluates the expected SiFi at every grid value. Every point reuses the
/// same seed so neighbouring points share random numbers.
pub fn sweep(spec: &SweepSpec, exec: Execution) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rows = par::map_slice(&spec.grid, exec, |&value| -> Result<SweepRow> {
        let cfg = spec.config_at(value)?;
        let mut row = SweepRow {
            value,
            slots: cfg.slots(),
            mcmc: None,
            exact: None,
            simulated: None,
            sim_stderr: None,
        };
        for mode in &spec.modes {
            match mode {
                EvalMode::Mcmc => row.mcmc = Some(mcmc::expected_sifi_mcmc(&cfg, spec.samples, spec.seed)?),
                EvalMode::Exact => row.exact = Some(analytic::expected_sifi_exact_with(&cfg, exec)?),
                EvalMode::Simulate => {
                    let s = mac::simulate_with(&cfg, spec.samples, spec.seed, exec)?;
                    row.simulated = Some(s.mean_sifi);
                    row.sim_stderr = Some(s.sifi_stderr);
                }
            }
        }
        Ok(row)
    });
    rows.into_iter().collect()
}

/// [`sweep`] over the compression rate `r`; `L` follows from `r`.
pub fn sweep_sifi_vs_rate(
    base: &ScenarioConfig,
    rates: &[f64],
    modes: &[EvalMode],
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    let spec = SweepSpec {
        parameter: "compression_rate".into(),
        grid: rates.to_vec(),
        base: base.clone(),
        modes: modes.to_vec(),
        samples,
        seed,
    };
    sweep(&spec, exec)
}

/// `V_th = 0.50, 0.51, …, 0.80`.
pub fn threshold_grid() -> Vec<f64> {
    (50..=80).map(|i| f64::from(i) / 100.0).collect()
}

/// `r = 1 + k / steps` for `k = 0..=steps`, covering `[1, 2]`.
pub fn rate_grid(steps: u32) -> Vec<f64> {
    let steps = steps.max(1);
    (0..=steps).map(|k| 1.0 + f64::from(k) / f64::from(steps)).collect()
}

pub const DEFAULT_RATE_STEPS: u32 = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeSpec {
    pub base: ScenarioConfig,
    pub thresholds: Vec<f64>,
    pub rates: Vec<f64>,
    /// `γ_th`, the SiFi the chosen point must reach.
    pub target_sifi: f64,
    pub samples: u64,
    pub seed: u64,
}

impl OptimizeSpec {
    pub fn new(base: ScenarioConfig, target_sifi: f64, samples: u64, seed: u64) -> Self {
        Self {
            base,
            thresholds: threshold_grid(),
            rates: rate_grid(DEFAULT_RATE_STEPS),
            target_sifi,
            samples,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub relevance_threshold: f64,
    pub compression_rate: f64,
    pub slots: u32,
    pub sifi: f64,
    pub energy: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    /// Minimum-energy feasible point, or the highest-SiFi point when nothing
    /// is feasible.
    pub best: GridPoint,
    pub feasible: bool,
    pub target_sifi: f64,
    pub grid: Vec<GridPoint>,
}

// Lowest energy, then highest SiFi, then smallest r, then smallest V_th.
fn preference(a: &GridPoint, b: &GridPoint) -> Ordering {
    a.energy
        .total_cmp(&b.energy)
        .then(b.sifi.total_cmp(&a.sifi))
        .then(a.compression_rate.total_cmp(&b.compression_rate))
        .then(a.relevance_threshold.total_cmp(&b.relevance_threshold))
}

/// Grid search for the cheapest `(V_th, r)` whose expected SiFi reaches the
/// target. SiFi comes from the Metropolis estimate with the same seed at
/// every point; the chain depends only on `V_th`, so one chain per threshold
/// serves all rates and each value equals a standalone
/// [`mcmc::expected_sifi_mcmc`] call at that point.
pub fn optimize(spec: &OptimizeSpec, exec: Execution) -> Result<OptimizationResult> {
    if spec.target_sifi.is_nan() {
        return Err(Error::InvalidSweep("target SiFi is NaN".into()));
    }
    if spec.thresholds.is_empty() || spec.rates.is_empty() {
        return Err(Error::InvalidSweep("optimization grid is empty".into()));
    }
    let opts = ChainOptions::from_config(&spec.base, spec.samples, spec.seed);

    let per_threshold = par::map_slice(&spec.thresholds, exec, |&v| -> Result<Vec<GridPoint>> {
        let configs: Vec<ScenarioConfig> = spec
            .rates
            .iter()
            .map(|&r| {
                let cfg = spec.base.with_operating_point(v, r);
                cfg.validate().map(|_| cfg)
            })
            .collect::<Result<_>>()?;
        let views: Vec<SifiModel> = configs.iter().map(SifiModel::new).collect::<Result<_>>()?;
        let sifi = mcmc::estimate_views(&views[0], &views, &opts);
        configs
            .iter()
            .zip(sifi)
            .map(|(cfg, s)| {
                Ok(GridPoint {
                    relevance_threshold: cfg.relevance_threshold,
                    compression_rate: cfg.compression_rate,
                    slots: cfg.slots(),
                    sifi: s,
                    energy: expected_total_energy(cfg)?,
                    feasible: s >= spec.target_sifi,
                })
            })
            .collect()
    });

    let mut grid = Vec::with_capacity(spec.thresholds.len() * spec.rates.len());
    for points in per_threshold {
        grid.extend(points?);
    }

    let best_feasible = grid.iter().filter(|p| p.feasible).min_by(|a, b| preference(a, b));
    let (best, feasible) = match best_feasible {
        Some(p) => (*p, true),
        None => {
            let p = grid
                .iter()
                .min_by(|a, b| b.sifi.total_cmp(&a.sifi).then(preference(a, b)))
                .expect("grid is nonempty");
            log::warn!(
                "no grid point reaches SiFi {}; best achievable is {}",
                spec.target_sifi,
                p.sifi
            );
            (*p, false)
        }
    };
    Ok(OptimizationResult {
        best,
        feasible,
        target_sifi: spec.target_sifi,
        grid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompareRow {
    pub images: u32,
    pub relevance_threshold: f64,
    pub compression_rate: f64,
    pub sifi: f64,
    pub feasible: bool,
    pub energy_ecopull: f64,
    pub energy_tinyairnet: f64,
    pub energy_baseline: f64,
    pub eta_ecopull: f64,
    pub eta_tinyairnet: f64,
}

/// Optimizes EcoPull for every `N` in `images` and reports the energy-saving
/// ratios of EcoPull and TinyAirNet against the baseline. TinyAirNet runs at
/// the configured `V_th`, or at EcoPull's chosen one when
/// `baselines.tinyairnet_follows_optimum` is set.
pub fn compare_schemes(spec: &OptimizeSpec, images: &[u32], exec: Execution) -> Result<Vec<CompareRow>> {
    if images.is_empty() {
        return Err(Error::InvalidSweep("image grid is empty".into()));
    }
    if images.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidSweep("image grid must be strictly increasing".into()));
    }
    images
        .iter()
        .map(|&n| {
            let base = ScenarioConfig {
                images_per_device: n,
                ..spec.base.clone()
            };
            base.validate()?;
            let opt = optimize(
                &OptimizeSpec {
                    base: base.clone(),
                    ..spec.clone()
                },
                exec,
            )?;
            let at = base.with_operating_point(opt.best.relevance_threshold, opt.best.compression_rate);
            let baseline = baseline_energy(&at);
            let tiny = if base.baselines.tinyairnet_follows_optimum {
                tinyairnet_energy(&at)?
            } else {
                tinyairnet_energy(&base)?
            };
            Ok(CompareRow {
                images: n,
                relevance_threshold: opt.best.relevance_threshold,
                compression_rate: opt.best.compression_rate,
                sifi: opt.best.sifi,
                feasible: opt.feasible,
                energy_ecopull: opt.best.energy,
                energy_tinyairnet: tiny,
                energy_baseline: baseline,
                eta_ecopull: energy_saving_ratio(opt.best.energy, baseline)?,
                eta_tinyairnet: energy_saving_ratio(tiny, baseline)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub relevance_threshold: f64,
    pub compression_rate: f64,
    pub p_th: f64,
    pub expected: f64,
    pub closed_form: f64,
}

/// Expected per-device energy over a `V_th × r` grid, by both formulas.
pub fn expected_energy_grid(
    base: &ScenarioConfig,
    thresholds: &[f64],
    rates: &[f64],
    exec: Execution,
) -> Result<Vec<EnergyRow>> {
    let points: Vec<(f64, f64)> = thresholds
        .iter()
        .flat_map(|&v| rates.iter().map(move |&r| (v, r)))
        .collect();
    par::map_slice(&points, exec, |&(v, r)| {
        let cfg = base.with_operating_point(v, r);
        cfg.validate()?;
        Ok(EnergyRow {
            relevance_threshold: v,
            compression_rate: r,
            p_th: scenario_p_th(&cfg)?,
            expected: expected_total_energy(&cfg)?,
            closed_form: expected_total_energy_closed_form(&cfg)?,
        })
    })
    .into_iter()
    .collect()
}
