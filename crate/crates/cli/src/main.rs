use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ecopull::analytic::{self, SifiModel};
use ecopull::baselines::{self, SchemeKind};
use ecopull::config::AcceptanceRule;
use ecopull::energy;
use ecopull::experiments::{self, EvalMode, OptimizeSpec, SweepSpec};
use ecopull::hardware::{inference_breakdown, InferenceBreakdown};
use ecopull::mac;
use ecopull::mcmc::{self, ChainOptions};
use ecopull::report::{Cell, LineChart, Series, Table};
use ecopull::{load_config_with_overrides, Execution, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "ecopull", version, about = "Energy and SiFi experiments for TinyML-assisted IoT image pulling")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML). Missing keys take their default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration value, e.g. `--set radio.rate=2e5`.
    #[arg(long = "set", value_name = "PATH=VALUE", global = true)]
    overrides: Vec<String>,
    #[arg(long, default_value_t = 1, global = true)]
    seed: u64,
    /// Output directory; tables go to stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv, global = true)]
    format: Format,
    /// Print the effective configuration to stderr before running.
    #[arg(long, global = true)]
    print_config: bool,
    /// Disable the thread pool.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Simulate,
    Exact,
    Mcmc,
}

impl From<Mode> for EvalMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Simulate => EvalMode::Simulate,
            Mode::Exact => EvalMode::Exact,
            Mode::Mcmc => EvalMode::Mcmc,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum AnalyzeMode {
    Exact,
    Mcmc,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte Carlo pull rounds: one row per round plus an aggregate.
    Simulate {
        #[arg(long, default_value_t = 1000)]
        rounds: u64,
    },
    /// Expected SiFi from the analysis.
    Analyze {
        #[arg(long, value_enum, default_value_t = AnalyzeMode::Mcmc)]
        mode: AnalyzeMode,
        /// Chain samples `T`.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = 1)]
        chains: u32,
        /// Also emit the per-step conditional SiFi of the first chain.
        #[arg(long)]
        trace: bool,
    },
    /// SiFi as a function of one parameter, by default the compression rate.
    SweepSifi {
        /// Dotted configuration path to sweep.
        #[arg(long, default_value = "compression_rate")]
        param: String,
        /// `from:to:step` or a comma-separated list.
        #[arg(long, default_value = "1.0:4.8:0.1")]
        grid: String,
        /// Slot coefficients `c_L`; one curve each. Empty keeps the configured slots.
        #[arg(long, value_delimiter = ',', default_value = "2,5,10")]
        slot_coefficients: Vec<u32>,
        #[arg(long, value_enum, value_delimiter = ',', default_value = "mcmc,simulate")]
        modes: Vec<Mode>,
        /// Simulation rounds and chain samples per point.
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
    },
    /// Cheapest (V_th, r) meeting a SiFi target.
    Optimize {
        #[arg(long, default_value_t = 0.8)]
        target: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        /// The rate grid is 1 + k / steps for k = 0..=steps.
        #[arg(long, default_value_t = experiments::DEFAULT_RATE_STEPS)]
        r_steps: u32,
    },
    /// Energy-saving ratio of EcoPull and TinyAirNet against the baseline.
    Compare {
        #[arg(long, default_value_t = 0.8)]
        target: f64,
        /// Images per device, `from:to:step` or a list.
        #[arg(long, default_value = "5:100:5")]
        images: String,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = experiments::DEFAULT_RATE_STEPS)]
        r_steps: u32,
    },
    /// Every energy term of the configured scenario.
    EnergyBreakdown,
    /// Expected per-device energy over a V_th x r grid.
    ExpectedEnergy {
        #[arg(long, default_value = "0.5:0.8:0.01")]
        thresholds: String,
        #[arg(long, default_value = "1:2:0.0666666666666667")]
        rates: String,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

struct Output {
    tables: Vec<(String, Table)>,
    charts: Vec<(String, LineChart)>,
}

impl Output {
    fn tables(tables: Vec<(&str, Table)>) -> Self {
        Self {
            tables: tables.into_iter().map(|(n, t)| (n.to_string(), t)).collect(),
            charts: Vec::new(),
        }
    }

    fn chart(mut self, name: &str, chart: LineChart) -> Self {
        self.charts.push((name.to_string(), chart));
        self
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let common = &cli.common;
    let source = match &common.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => String::new(),
    };
    let cfg = load_config_with_overrides(&source, &common.overrides)?;
    if common.print_config {
        eprint!("{}", cfg.to_toml());
    }
    let exec = if common.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };

    let output = match &cli.command {
        Command::PrintConfig => {
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Simulate { rounds } => simulate(&cfg, *rounds, common.seed, exec)?,
        Command::Analyze {
            mode,
            samples,
            chains,
            trace,
        } => analyze(&cfg, *mode, *samples, *chains, *trace, common.seed, exec)?,
        Command::SweepSifi {
            param,
            grid,
            slot_coefficients,
            modes,
            samples,
        } => sweep(&cfg, param, &parse_grid(grid)?, slot_coefficients, modes, *samples, common.seed, exec)?,
        Command::Optimize {
            target,
            samples,
            r_steps,
        } => optimize(&cfg, *target, *samples, *r_steps, common.seed, exec)?,
        Command::Compare {
            target,
            images,
            samples,
            r_steps,
        } => compare(&cfg, *target, images, *samples, *r_steps, common.seed, exec)?,
        Command::EnergyBreakdown => energy_breakdown(&cfg)?,
        Command::ExpectedEnergy { thresholds, rates } => {
            expected_energy(&cfg, &parse_grid(thresholds)?, &parse_grid(rates)?, exec)?
        }
    };
    emit(common, output)
}

/// `from:to:step` (inclusive, computed by index) or `a,b,c`.
fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let from: f64 = parts[0].trim().parse().context("grid start")?;
        let to: f64 = parts[1].trim().parse().context("grid end")?;
        let step: f64 = parts[2].trim().parse().context("grid step")?;
        if step.is_nan() || step <= 0.0 || to < from {
            bail!("grid `{text}` needs step > 0 and end >= start");
        }
        let n = ((to - from) / step + 1e-9).floor() as u64;
        // Rounded to 12 decimals so 1.0 + 3 * 0.1 prints as 1.3.
        return Ok((0..=n)
            .map(|k| ((from + k as f64 * step) * 1e12).round() / 1e12)
            .collect());
    }
    text.split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("grid value `{s}`")))
        .collect()
}

fn parse_counts(text: &str) -> Result<Vec<u32>> {
    parse_grid(text)?
        .into_iter()
        .map(|v| {
            if v.fract() != 0.0 || v < 0.0 || v > f64::from(u32::MAX) {
                bail!("`{v}` is not a count");
            }
            Ok(v as u32)
        })
        .collect()
}

fn simulate(cfg: &ScenarioConfig, rounds: u64, seed: u64, exec: Execution) -> Result<Output> {
    let outcomes = mac::simulate_rounds(cfg, rounds.max(1), seed, exec)?;
    let mut per_round = Table::new([
        "round",
        "sifi",
        "mean_device_energy_j",
        "relevant",
        "actual_relevant",
        "delivered",
        "collided",
        "frames",
    ]);
    for (i, o) in outcomes.iter().enumerate() {
        per_round.push(vec![
            i.into(),
            o.sifi.into(),
            o.mean_device_energy().into(),
            o.relevant_counts.iter().sum::<u32>().into(),
            o.actual_relevant_count.into(),
            o.delivered_count.into(),
            o.collided_count.into(),
            o.frames_used.into(),
        ]);
    }
    let s = mac::summarize(&outcomes);
    let mut summary = Table::new([
        "rounds",
        "mean_sifi",
        "sifi_stderr",
        "mean_device_energy_j",
        "energy_stderr_j",
        "mean_delivered",
        "mean_frames",
        "slots",
    ]);
    summary.push(vec![
        s.rounds.into(),
        s.mean_sifi.into(),
        s.sifi_stderr.into(),
        s.mean_total_energy.into(),
        s.energy_stderr.into(),
        s.mean_delivered.into(),
        s.mean_frames.into(),
        cfg.slots().into(),
    ]);
    let chart = LineChart::new("Per-round SiFi", "round", "SiFi").with_series(Series::new(
        "sifi",
        outcomes.iter().enumerate().map(|(i, o)| (i as f64, o.sifi)).collect(),
    ));
    Ok(Output::tables(vec![("simulate_rounds", per_round), ("simulate_summary", summary)]).chart("simulate", chart))
}

fn analyze(
    cfg: &ScenarioConfig,
    mode: AnalyzeMode,
    samples: u64,
    chains: u32,
    trace: bool,
    seed: u64,
    exec: Execution,
) -> Result<Output> {
    let model = SifiModel::new(cfg)?;
    let mut table = Table::new([
        "mode",
        "estimate",
        "acceptance_rule",
        "acceptance_rate",
        "samples",
        "chains",
        "slots",
        "p_th",
        "p_delta",
        "compositions",
    ]);
    let count = analytic::composition_count(cfg.device_count, cfg.images_per_device);
    // Exact below 2^53; larger counts are only indicative.
    let compositions = if count < 9.0e15 { Cell::Int(count as i64) } else { Cell::Float(count) };
    let mut out = Vec::new();
    let mut chart = None;
    match mode {
        AnalyzeMode::Exact => {
            let v = analytic::expected_sifi_exact_with(cfg, exec)?;
            table.push(vec![
                "exact".into(),
                v.into(),
                "".into(),
                "".into(),
                "".into(),
                "".into(),
                model.slots.into(),
                model.p_th.into(),
                model.p_delta.into(),
                compositions.clone(),
            ]);
        }
        AnalyzeMode::Mcmc => {
            let opts = ChainOptions {
                chains: chains.max(1),
                keep_trace: trace,
                ..ChainOptions::from_config(cfg, samples, seed)
            };
            let est = mcmc::estimate_with_model(&model, &opts, exec);
            let rule = match opts.rule {
                AcceptanceRule::Metropolis => "metropolis",
                AcceptanceRule::Hastings => "hastings",
            };
            table.push(vec![
                "mcmc".into(),
                est.estimate.into(),
                rule.into(),
                est.acceptance_rate.into(),
                est.samples.into(),
                opts.chains.into(),
                model.slots.into(),
                model.p_th.into(),
                model.p_delta.into(),
                compositions.clone(),
            ]);
            if trace {
                let mut t = Table::new(["step", "conditional_sifi", "running_mean"]);
                let mut sum = 0.0;
                let mut points = Vec::with_capacity(est.trace.len());
                for (i, u) in est.trace.iter().enumerate() {
                    sum += u;
                    let mean = sum / (i + 1) as f64;
                    t.push(vec![i.into(), (*u).into(), mean.into()]);
                    points.push((i as f64, mean));
                }
                out.push(("analyze_trace", t));
                chart = Some(
                    LineChart::new("Running MCMC estimate", "step", "expected SiFi")
                        .with_series(Series::new("running mean", points)),
                );
            }
        }
    }
    out.insert(0, ("analyze", table));
    let output = Output::tables(out);
    Ok(match chart {
        Some(c) => output.chart("analyze_trace", c),
        None => output,
    })
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    cfg: &ScenarioConfig,
    param: &str,
    grid: &[f64],
    coefficients: &[u32],
    modes: &[Mode],
    samples: u64,
    seed: u64,
    exec: Execution,
) -> Result<Output> {
    let modes: Vec<EvalMode> = modes.iter().map(|&m| m.into()).collect();
    let bases: Vec<(Option<u32>, ScenarioConfig)> = if coefficients.is_empty() {
        vec![(cfg.slot_coefficient, cfg.clone())]
    } else {
        coefficients
            .iter()
            .map(|&c| {
                let mut b = cfg.clone();
                b.slots_per_frame = None;
                b.slot_coefficient = Some(c);
                (Some(c), b)
            })
            .collect()
    };

    let mut table = Table::new([
        "slot_coefficient",
        param,
        "slots",
        "sifi_mcmc",
        "sifi_exact",
        "sifi_sim",
        "sim_stderr",
    ]);
    let mut chart = LineChart::new("Expected SiFi", param, "SiFi");
    for (coef, base) in bases {
        let spec = SweepSpec {
            parameter: param.to_string(),
            grid: grid.to_vec(),
            base,
            modes: modes.clone(),
            samples,
            seed,
        };
        let rows = experiments::sweep(&spec, exec)?;
        let label = coef.map_or_else(|| "L fixed".to_string(), |c| format!("c_L={c}"));
        for row in &rows {
            table.push(vec![
                coef.map_or(Cell::Text(String::new()), Cell::from),
                row.value.into(),
                row.slots.into(),
                row.mcmc.into(),
                row.exact.into(),
                row.simulated.into(),
                row.sim_stderr.into(),
            ]);
        }
        let series = [
            ("mcmc", rows.iter().map(|r| r.mcmc).collect::<Vec<_>>()),
            ("exact", rows.iter().map(|r| r.exact).collect()),
            ("sim", rows.iter().map(|r| r.simulated).collect()),
        ];
        for (name, values) in series {
            if values.iter().all(Option::is_some) {
                let points = rows.iter().zip(values).map(|(r, v)| (r.value, v.unwrap())).collect();
                chart = chart.with_series(Series::new(format!("{label} {name}"), points));
            }
        }
    }
    Ok(Output::tables(vec![("sweep_sifi", table)]).chart("sweep_sifi", chart))
}

fn optimize(cfg: &ScenarioConfig, target: f64, samples: u64, steps: u32, seed: u64, exec: Execution) -> Result<Output> {
    let spec = OptimizeSpec {
        rates: experiments::rate_grid(steps),
        ..OptimizeSpec::new(cfg.clone(), target, samples, seed)
    };
    let opt = experiments::optimize(&spec, exec)?;
    let mut grid = Table::new(["v_th", "r", "slots", "sifi", "energy_j", "feasible"]);
    for p in &opt.grid {
        grid.push(vec![
            p.relevance_threshold.into(),
            p.compression_rate.into(),
            p.slots.into(),
            p.sifi.into(),
            p.energy.into(),
            p.feasible.into(),
        ]);
    }
    let b = opt.best;
    let at = cfg.with_operating_point(b.relevance_threshold, b.compression_rate);
    let baseline = baselines::baseline_energy(&at);
    let mut best = Table::new([
        "target_sifi",
        "feasible",
        "v_th",
        "r",
        "slots",
        "sifi",
        "energy_j",
        "baseline_energy_j",
        "eta",
    ]);
    best.push(vec![
        target.into(),
        opt.feasible.into(),
        b.relevance_threshold.into(),
        b.compression_rate.into(),
        b.slots.into(),
        b.sifi.into(),
        b.energy.into(),
        baseline.into(),
        baselines::energy_saving_ratio(b.energy, baseline)?.into(),
    ]);
    if !opt.feasible {
        eprintln!("warning: no grid point reaches SiFi {target}; reporting the highest-SiFi point");
    }

    // Cheapest feasible energy for each V_th.
    let mut points = Vec::new();
    for &v in &spec.thresholds {
        let e = opt
            .grid
            .iter()
            .filter(|p| p.relevance_threshold == v && p.feasible)
            .map(|p| p.energy)
            .fold(f64::INFINITY, f64::min);
        if e.is_finite() {
            points.push((v, e));
        }
    }
    let chart = LineChart::new("Cheapest feasible energy per threshold", "V_th", "energy per device (J)")
        .with_series(Series::new("energy", points));
    Ok(Output::tables(vec![("optimize_best", best), ("optimize_grid", grid)]).chart("optimize", chart))
}

fn compare(
    cfg: &ScenarioConfig,
    target: f64,
    images: &str,
    samples: u64,
    steps: u32,
    seed: u64,
    exec: Execution,
) -> Result<Output> {
    let spec = OptimizeSpec {
        rates: experiments::rate_grid(steps),
        ..OptimizeSpec::new(cfg.clone(), target, samples, seed)
    };
    let rows = experiments::compare_schemes(&spec, &parse_counts(images)?, exec)?;
    let assumptions = baselines::describe_assumptions(cfg);
    for a in &assumptions {
        eprintln!("assumption: {a}");
    }
    let mut table = Table::new([
        "n",
        "v_th",
        "r",
        "sifi",
        "feasible",
        "energy_ecopull_j",
        "energy_tinyairnet_j",
        "energy_baseline_j",
        "eta_ecopull",
        "eta_tinyairnet",
    ]);
    for r in &rows {
        table.push(vec![
            r.images.into(),
            r.relevance_threshold.into(),
            r.compression_rate.into(),
            r.sifi.into(),
            r.feasible.into(),
            r.energy_ecopull.into(),
            r.energy_tinyairnet.into(),
            r.energy_baseline.into(),
            r.eta_ecopull.into(),
            r.eta_tinyairnet.into(),
        ]);
    }
    let mut notes = Table::new(["assumption", "value"]);
    for a in assumptions {
        let (k, v) = a.split_once('=').unwrap_or((a.as_str(), ""));
        notes.push(vec![k.into(), v.into()]);
    }
    let eta = |f: fn(&experiments::CompareRow) -> f64| rows.iter().map(|r| (f64::from(r.images), f(r))).collect();
    let chart = LineChart::new("Energy saving w.r.t. the baseline", "images per device N", "eta")
        .with_series(Series::new(SchemeKind::EcoPull.to_string(), eta(|r| r.eta_ecopull)))
        .with_series(Series::new(SchemeKind::TinyAirNet.to_string(), eta(|r| r.eta_tinyairnet)));
    Ok(Output::tables(vec![("compare", table), ("compare_assumptions", notes)]).chart("compare", chart))
}

fn energy_breakdown(cfg: &ScenarioConfig) -> Result<Output> {
    let mut table = Table::new(["term", "joules"]);
    let mut push = |name: &str, v: f64| table.push(vec![name.into(), v.into()]);
    let model_rows = |prefix: &str, b: InferenceBreakdown, push: &mut dyn FnMut(&str, f64)| {
        push(&format!("{prefix}_dram"), b.dram);
        push(&format!("{prefix}_compute"), b.compute);
        push(&format!("{prefix}_weights"), b.weights);
        push(&format!("{prefix}_activations"), b.activations);
        push(&format!("{prefix}_inference"), b.total());
    };
    model_rows(
        "behavior",
        inference_breakdown(&cfg.behavior_hw, &cfg.behavior_model, &cfg.image),
        &mut push,
    );
    model_rows(
        "compressor",
        inference_breakdown(&cfg.compressor_hw, &cfg.compressor_model, &cfg.image),
        &mut push,
    );
    push("model_load", energy::model_load_term(cfg));
    push("reception", energy::reception_energy(cfg));
    push("transmit_per_image", energy::transmit_energy_per_image(cfg));
    push("per_relevant_image", energy::per_relevant_image_energy(cfg));
    push("fixed_overhead", energy::fixed_overhead(cfg));
    push("p_th", energy::scenario_p_th(cfg)?);
    for kind in SchemeKind::ALL {
        push(&format!("expected_{kind}"), baselines::scheme_energy(kind, cfg)?);
    }
    Ok(Output::tables(vec![("energy_breakdown", table)]))
}

fn expected_energy(cfg: &ScenarioConfig, thresholds: &[f64], rates: &[f64], exec: Execution) -> Result<Output> {
    let rows = experiments::expected_energy_grid(cfg, thresholds, rates, exec)?;
    let mut table = Table::new(["v_th", "r", "p_th", "expected_energy_j", "closed_form_j"]);
    for r in &rows {
        table.push(vec![
            r.relevance_threshold.into(),
            r.compression_rate.into(),
            r.p_th.into(),
            r.expected.into(),
            r.closed_form.into(),
        ]);
    }
    let mut chart = LineChart::new("Expected energy per device", "V_th", "energy (J)");
    for &rate in rates {
        let points = rows
            .iter()
            .filter(|r| r.compression_rate == rate)
            .map(|r| (r.relevance_threshold, r.expected))
            .collect();
        chart = chart.with_series(Series::new(format!("r={rate}"), points));
    }
    Ok(Output::tables(vec![("expected_energy", table)]).chart("expected_energy", chart))
}

fn emit(common: &Common, output: Output) -> Result<()> {
    let want_csv = matches!(common.format, Format::Csv | Format::Both);
    let want_svg = matches!(common.format, Format::Svg | Format::Both);
    if want_svg && output.charts.is_empty() {
        log::warn!("this command has no chart; writing CSV only");
    }
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            if want_csv || output.charts.is_empty() {
                for (name, table) in &output.tables {
                    let path = dir.join(format!("{name}.csv"));
                    let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    table.write_csv(io::BufWriter::new(file))?;
                }
            }
            if want_svg {
                for (name, chart) in &output.charts {
                    fs::write(dir.join(format!("{name}.svg")), chart.to_svg())?;
                }
            }
        }
        None => {
            if common.format == Format::Both {
                bail!("--format both needs --out");
            }
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            if want_svg && !output.charts.is_empty() {
                for (_, chart) in &output.charts {
                    lock.write_all(chart.to_svg().as_bytes())?;
                }
            } else {
                for (i, (_, table)) in output.tables.iter().enumerate() {
                    if i > 0 {
                        writeln!(lock)?;
                    }
                    table.write_csv(&mut lock)?;
                }
            }
        }
    }
    Ok(())
}
