//! Metropolis approximation of the expected SiFi.
//!
//! The chain walks over realizations `ψ` by moving one device from an occupied
//! bin `a` to a different bin `b`, accepting with the ratio of multinomial
//! probabilities. The estimate is the average of the conditional expected SiFi
//! over every visited state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::SifiModel;
use crate::config::{AcceptanceRule, ScenarioConfig};
use crate::error::Result;
use crate::mac::round_seed;
use crate::par::{self, Execution};

/// Devices dealt round-robin over `ν = 0, 1, …, N`.
pub fn fair_initial_state(devices: u32, images: u32) -> Vec<u32> {
    let bins = images as usize + 1;
    let mut q = vec![0u32; bins];
    for d in 0..devices as usize {
        q[d % bins] += 1;
    }
    q
}

/// A single Metropolis chain over realizations.
#[derive(Debug, Clone)]
pub struct Chain<'m> {
    model: &'m SifiModel,
    rule: AcceptanceRule,
    state: Vec<u32>,
    occupied: usize,
}

impl<'m> Chain<'m> {
    pub fn new(model: &'m SifiModel, rule: AcceptanceRule) -> Self {
        Self::from_state(model, rule, fair_initial_state(model.devices, model.images))
    }

    pub fn from_state(model: &'m SifiModel, rule: AcceptanceRule, state: Vec<u32>) -> Self {
        assert_eq!(state.len(), model.images as usize + 1);
        let occupied = state.iter().filter(|&&q| q > 0).count();
        Self {
            model,
            rule,
            state,
            occupied,
        }
    }

    pub fn state(&self) -> &[u32] {
        &self.state
    }

    /// One proposal and accept/reject decision. Returns whether it moved.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let bins = self.state.len();
        if bins < 2 || self.occupied == 0 {
            return false;
        }

        let pick = rng.random_range(0..self.occupied);
        let a = self
            .state
            .iter()
            .enumerate()
            .filter(|(_, &q)| q > 0)
            .nth(pick)
            .map(|(i, _)| i)
            .expect("pick < occupied");
        let other = rng.random_range(0..bins - 1);
        let b = if other >= a { other + 1 } else { other };
        let u: f64 = rng.random();

        let qa = self.state[a];
        let qb = self.state[b];
        let lp_a = self.model.log_prel[a];
        let lp_b = self.model.log_prel[b];

        // P(Y')/P(Y) = P_Rel(b)/P_Rel(a) · q_a/(q_b + 1); K! cancels.
        let mut log_ratio = if lp_a == f64::NEG_INFINITY && lp_b == f64::NEG_INFINITY {
            0.0
        } else {
            lp_b - lp_a
        };
        log_ratio += f64::from(qa).ln() - f64::from(qb + 1).ln();

        let occupied_after = self.occupied - usize::from(qa == 1) + usize::from(qb == 0);
        if self.rule == AcceptanceRule::Hastings {
            log_ratio += (self.occupied as f64).ln() - (occupied_after as f64).ln();
        }

        let ratio = log_ratio.exp();
        if !(ratio > 0.0 && u <= ratio) {
            return false;
        }
        self.state[a] -= 1;
        self.state[b] += 1;
        self.occupied = occupied_after;
        debug_assert_eq!(
            self.state.iter().map(|&q| u64::from(q)).sum::<u64>(),
            u64::from(self.model.devices)
        );
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainOptions {
    /// `T`, the number of recorded samples per chain.
    pub samples: u64,
    pub seed: u64,
    pub rule: AcceptanceRule,
    pub burn_in: u64,
    /// Independent chains averaged together; chain `c` is seeded from
    /// `round_seed(seed, c)`.
    pub chains: u32,
    pub keep_trace: bool,
}

impl ChainOptions {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            rule: AcceptanceRule::Metropolis,
            burn_in: 0,
            chains: 1,
            keep_trace: false,
        }
    }

    pub fn from_config(cfg: &ScenarioConfig, samples: u64, seed: u64) -> Self {
        Self {
            rule: cfg.analysis.acceptance,
            burn_in: cfg.analysis.burn_in,
            ..Self::new(samples, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcEstimate {
    pub estimate: f64,
    pub acceptance_rate: f64,
    pub samples: u64,
    /// Per-step conditional SiFi `u^(t)` of the first chain, when requested.
    pub trace: Vec<f64>,
}

fn run_one(model: &SifiModel, opts: &ChainOptions, seed: u64, keep_trace: bool) -> McmcEstimate {
    let run = run_views(model, std::slice::from_ref(model), opts, seed, keep_trace);
    McmcEstimate {
        estimate: run.sums[0] / opts.samples as f64,
        acceptance_rate: run.acceptance_rate,
        samples: opts.samples,
        trace: run.trace,
    }
}

struct ViewRun {
    sums: Vec<f64>,
    acceptance_rate: f64,
    trace: Vec<f64>,
}

// The chain is driven by `model`; each view only supplies the state value.
fn run_views(model: &SifiModel, views: &[SifiModel], opts: &ChainOptions, seed: u64, keep_trace: bool) -> ViewRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chain = Chain::new(model, opts.rule);
    let mut values: Vec<f64> = views.iter().map(|v| v.state_value(chain.state())).collect();
    let mut sums = vec![0.0; views.len()];
    let mut accepted = 0u64;
    let mut trace = Vec::new();
    let total = opts.burn_in + opts.samples;

    for t in 0..total {
        if chain.step(&mut rng) {
            accepted += 1;
            for (value, view) in values.iter_mut().zip(views) {
                *value = view.state_value(chain.state());
            }
        }
        if t >= opts.burn_in {
            for (sum, value) in sums.iter_mut().zip(&values) {
                *sum += value;
            }
            if keep_trace {
                trace.push(values[0]);
            }
        }
    }

    ViewRun {
        sums,
        acceptance_rate: accepted as f64 / total.max(1) as f64,
        trace,
    }
}

/// Estimates for several models that share `model`'s relevance statistics
/// (same `K`, `N` and `P_th`) but differ in slots or fidelity, from one chain
/// per seed. Each entry equals what [`estimate_with_model`] returns for that
/// view with the same options.
pub fn estimate_views(model: &SifiModel, views: &[SifiModel], opts: &ChainOptions) -> Vec<f64> {
    let samples = opts.samples.max(1);
    let chains = opts.chains.max(1);
    let opts = ChainOptions { samples, chains, ..*opts };
    if chains == 1 {
        let run = run_views(model, views, &opts, opts.seed, false);
        return run.sums.iter().map(|s| s / samples as f64).collect();
    }
    let mut totals = vec![0.0; views.len()];
    for c in 0..chains {
        let run = run_views(model, views, &opts, round_seed(opts.seed, u64::from(c)), false);
        for (t, s) in totals.iter_mut().zip(&run.sums) {
            *t += s / samples as f64;
        }
    }
    totals.iter().map(|t| t / f64::from(chains)).collect()
}

/// Runs the configured chains against a precomputed model.
pub fn estimate_with_model(model: &SifiModel, opts: &ChainOptions, exec: Execution) -> McmcEstimate {
    let opts = ChainOptions {
        samples: opts.samples.max(1),
        chains: opts.chains.max(1),
        ..*opts
    };
    if opts.chains == 1 {
        return run_one(model, &opts, opts.seed, opts.keep_trace);
    }
    let runs = par::map_indexed(opts.chains as usize, exec, |c| {
        run_one(model, &opts, round_seed(opts.seed, c as u64), opts.keep_trace && c == 0)
    });
    let n = runs.len() as f64;
    let estimate = runs.iter().map(|r| r.estimate).sum::<f64>() / n;
    let acceptance_rate = runs.iter().map(|r| r.acceptance_rate).sum::<f64>() / n;
    let trace = runs.into_iter().next().map(|r| r.trace).unwrap_or_default();
    McmcEstimate {
        estimate,
        acceptance_rate,
        samples: opts.samples * u64::from(opts.chains),
        trace,
    }
}

pub fn expected_sifi_mcmc_detailed(cfg: &ScenarioConfig, opts: &ChainOptions) -> Result<McmcEstimate> {
    let model = SifiModel::new(cfg)?;
    Ok(estimate_with_model(&model, opts, Execution::Parallel))
}

/// Metropolis estimate of the expected SiFi from `samples` chain steps.
pub fn expected_sifi_mcmc(cfg: &ScenarioConfig, samples: u64, seed: u64) -> Result<f64> {
    Ok(expected_sifi_mcmc_detailed(cfg, &ChainOptions::from_config(cfg, samples, seed))?.estimate)
}
