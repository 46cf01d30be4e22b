//! Command-line driver for the cooling simulator.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numerical error
//! (basis truncation, quadrature failure, runaway population).

mod config;
mod csvio;
mod figures;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use config::{CycleSpec, InitialState, RunConfig};
use csvio::CsvWriter;
use std::path::PathBuf;
use trapcool::{
    build_cycle, emptying_rate, optimize_sequence, required_padding, thermal_populations,
    AngularDistribution, Cycle, DisplacementAmplitude, KickStrength, OptimizationProblem,
    PopulationVector, Pulse, PulseBounds, SchemeId, SimulationTrace, Simulator,
};

#[derive(Parser)]
#[command(
    name = "trapcool",
    about = "Rate-equation simulator and pulse-protocol designer for ground-state \
             cooling of a trapped atom outside the Lamb-Dicke regime",
    version
)]
struct Cli {
    /// Run configuration file (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Angular quadrature order floor (overrides `run.quad_order`).
    #[arg(long, global = true)]
    quad_order: Option<usize>,
    /// Basis size, or `auto` for the truncation policy (overrides
    /// `basis.n_max`).
    #[arg(long, global = true)]
    nmax: Option<String>,
    /// Photon angular distribution (overrides `params.angular`).
    #[arg(long, global = true)]
    angular: Option<AngularKind>,
    /// Lorentzian half-width as a fraction of the decay rate (overrides
    /// `params.gamma_ratio`).
    #[arg(long, global = true)]
    gamma_ratio: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum AngularKind {
    Dipole,
    Isotropic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    /// Ground-state population versus the Lamb-Dicke parameter.
    Fig2,
    /// Final distributions of the confinement-only and four-pulse protocols.
    Fig3,
    /// Blue-pulse emptying-rate curves.
    Fig4,
}

#[derive(Subcommand)]
enum Command {
    /// Print one displacement matrix element <n|exp(i eta (a + a'))|m>.
    Elements { n: usize, m: usize, eta: f64 },
    /// Emptying-rate table at one detuning, as CSV.
    Rates {
        /// Pulse detuning in trap-frequency units.
        #[arg(long, allow_hyphen_values = true)]
        delta: f64,
        /// Largest Fock level in the table.
        #[arg(long, default_value_t = 60)]
        rows: usize,
    },
    /// Run the configured pulse sequence and emit trace + final distribution.
    Simulate,
    /// Regenerate a reference figure's data and plot script.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Search pulse detunings and durations for the best final ground-state
    /// population.
    Optimize {
        /// Evaluation budget (overrides `optimize.budget`).
        #[arg(long)]
        budget: Option<usize>,
    },
}

fn main() -> std::process::ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return std::process::ExitCode::SUCCESS;
            }
            let _ = e.print();
            return std::process::ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::ExitCode::from(classify(&err))
        }
    }
}

/// Numerical failures exit 2; configuration and usage problems exit 1.
fn classify(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<trapcool::RatesError>()
            || cause.is::<trapcool::DynamicsError>()
            || cause.is::<trapcool::ProtocolError>()
        {
            return 2;
        }
    }
    1
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.out {
        config.out_dir = dir.clone();
    }
    if let Some(q) = cli.quad_order {
        config.quad_order = q;
    }
    if let Some(nmax) = &cli.nmax {
        config.n_max = if nmax == "auto" {
            None
        } else {
            Some(nmax.parse().map_err(|_| anyhow!("--nmax expects an integer or `auto`"))?)
        };
    }
    if let Some(kind) = cli.angular {
        config.angular = match kind {
            AngularKind::Dipole => AngularDistribution::Dipole,
            AngularKind::Isotropic => AngularDistribution::Isotropic,
        };
    }
    if let Some(ratio) = cli.gamma_ratio {
        config.gamma_ratio = ratio;
    }

    match cli.command {
        Command::Elements { n, m, eta } => cmd_elements(n, m, eta),
        Command::Rates { delta, rows } => cmd_rates(&config, delta, rows),
        Command::Simulate => cmd_simulate(&config),
        Command::Reproduce { figure } => {
            std::fs::create_dir_all(&config.out_dir)
                .with_context(|| format!("cannot create {}", config.out_dir.display()))?;
            match figure {
                Figure::Fig2 => figures::reproduce_eta_sweep(&config, &config.out_dir)?,
                Figure::Fig3 => figures::reproduce_distributions(&config, &config.out_dir)?,
                Figure::Fig4 => figures::reproduce_rate_curves(&config, &config.out_dir)?,
            }
            println!("wrote {}", config.out_dir.display());
            Ok(())
        }
        Command::Optimize { budget } => cmd_optimize(&config, budget),
    }
}

fn cmd_elements(n: usize, m: usize, eta: f64) -> Result<()> {
    let kick = KickStrength::new(eta).map_err(|e| anyhow!(e.to_string()))?;
    let DisplacementAmplitude { value, .. } = trapcool::displacement_element(n, m, kick);
    println!("value = {:.12e} {:+.12e} i", value.re, value.im);
    println!("magnitude = {:.12}", value.norm());
    Ok(())
}

/// The cycle described by the configuration, with the repetition count
/// applied.
fn configured_cycle(config: &RunConfig) -> Result<Cycle> {
    let params = config.params()?;
    let mut cycle = match &config.cycle {
        CycleSpec::Scheme(scheme) => build_cycle(*scheme, config.eta, &params)?,
        CycleSpec::Pulses(pairs) => {
            let pulses = pairs
                .iter()
                .map(|&(delta, duration)| Pulse::new(delta, duration))
                .collect::<Result<Vec<_>, _>>()?;
            Cycle::new(pulses, config.n_cycles.max(1))?
        }
    };
    cycle.n_cycles = config.n_cycles.max(1);
    Ok(cycle)
}

/// Initial-state support at the truncation policy's tail tolerance.
fn initial_support(config: &RunConfig) -> usize {
    match &config.initial {
        InitialState::Thermal(nbar) => {
            if *nbar <= 0.0 {
                0
            } else {
                let q = nbar / (1.0 + nbar);
                ((1e-10f64.ln() / q.ln()).ceil() as usize).saturating_sub(1)
            }
        }
        InitialState::Explicit(v) => {
            let mut tail = 0.0;
            for (n, &p) in v.iter().enumerate().rev() {
                tail += p;
                if tail >= 1e-10 {
                    return n;
                }
            }
            0
        }
    }
}

fn resolve_n_max(config: &RunConfig, cycle: &Cycle) -> usize {
    config.n_max.unwrap_or_else(|| {
        let max_delta = cycle.pulses.iter().map(|p| p.delta.abs()).fold(0.0, f64::max);
        trapcool::auto_n_max(initial_support(config), max_delta, config.eta)
    })
}

fn initial_vector(config: &RunConfig, n_max: usize) -> Result<PopulationVector> {
    match &config.initial {
        InitialState::Thermal(nbar) => Ok(thermal_populations(*nbar, n_max)?),
        InitialState::Explicit(v) => {
            if v.len() > n_max + 1 {
                bail!("explicit initial vector has {} entries but the basis holds {}", v.len(), n_max + 1);
            }
            let mut padded = v.clone();
            padded.resize(n_max + 1, 0.0);
            Ok(PopulationVector::from_probabilities(padded)?)
        }
    }
}

fn cmd_rates(config: &RunConfig, delta: f64, rows: usize) -> Result<()> {
    let params = config.params()?;
    let k_max = config
        .n_max
        .unwrap_or_else(|| rows + delta.abs().ceil() as usize + required_padding(config.eta));
    let csv = config.out_dir.join("rates.csv");
    let mut w = CsvWriter::create(
        &csv,
        "trapcool.rates.v1",
        &[
            ("delta_nu", format!("{delta}")),
            ("eta", format!("{}", config.eta)),
            ("gamma_over_nu", format!("{}", params.halfwidth)),
            ("k_max", format!("{k_max}")),
        ],
    )?;
    w.header("n,gamma_n_units_omega2_over_gamma")?;
    for n in 0..=rows {
        let rate = emptying_rate(n, delta, &params, k_max)?;
        w.row(format_args!("{n},{rate:.9e}"))?;
    }
    w.finish()?;
    println!("wrote {}", csv.display());
    Ok(())
}

fn write_trace_outputs(config: &RunConfig, trace: &SimulationTrace) -> Result<()> {
    let trace_csv = config.out_dir.join("trace.csv");
    let meta = [
        ("eta", format!("{}", config.eta)),
        ("gamma_over_nu", format!("{}", config.gamma_over_nu)),
        ("gamma_ratio", format!("{}", config.gamma_ratio)),
        ("n_max", format!("{}", trace.meta.n_max)),
        ("quad_order_floor", format!("{}", trace.meta.quad_order)),
    ];
    let mut w = CsvWriter::create(&trace_csv, "trapcool.trace.v1", &meta)?;
    w.header("cycle,P0,mean_n,tail_mass")?;
    for (idx, snapshot) in trace.snapshots.iter().enumerate() {
        w.row(format_args!(
            "{idx},{:.12},{:.9},{:.3e}",
            snapshot.ground_population(),
            snapshot.mean_occupation(),
            snapshot.edge_mass()
        ))?;
    }
    w.finish()?;

    let final_csv = config.out_dir.join("final.csv");
    let mut w = CsvWriter::create(&final_csv, "trapcool.final.v1", &meta)?;
    w.header("n,P_n")?;
    for (n, &p) in trace.final_population().as_slice().iter().enumerate() {
        w.row(format_args!("{n},{p:.12e}"))?;
    }
    w.finish()?;
    Ok(())
}

fn cmd_simulate(config: &RunConfig) -> Result<()> {
    let params = config.params()?;
    if config.n_cycles == 0 {
        // Degenerate run: the output is the initial state.
        let n_max = config.n_max.unwrap_or_else(|| {
            trapcool::auto_n_max(initial_support(config), 0.0, config.eta)
        });
        let initial = initial_vector(config, n_max)?;
        let trace = SimulationTrace {
            snapshots: vec![initial.clone()],
            p0_per_pulse: Vec::new(),
            max_norm_drift: 0.0,
            max_edge_mass: initial.edge_mass(),
            min_entry: initial.as_slice().iter().cloned().fold(f64::INFINITY, f64::min),
            meta: trapcool::TraceMeta {
                params,
                n_max,
                quad_order: config.quad_order,
                warnings: trapcool::validity_check(&params),
            },
        };
        write_trace_outputs(config, &trace)?;
        println!("cycles = 0; output equals initial state");
        println!("final_p0 = {:.12}", initial.ground_population());
        return Ok(());
    }

    let cycle = configured_cycle(config)?;
    let n_max = resolve_n_max(config, &cycle);
    let initial = initial_vector(config, n_max)?;
    let mut sim =
        Simulator::new(params, n_max, config.quad_order).with_cadence(config.snapshot);
    let trace = sim.run(&initial, &cycle)?;
    write_trace_outputs(config, &trace)?;
    for warning in &trace.meta.warnings {
        eprintln!("warning: {warning}");
    }
    println!(
        "final_p0 = {:.12}",
        trace.final_ground_population()
    );
    println!(
        "max_norm_drift = {:.3e}, max_tail_mass = {:.3e}, basis = {}",
        trace.max_norm_drift, trace.max_edge_mass, n_max
    );
    Ok(())
}

fn cmd_optimize(config: &RunConfig, budget_flag: Option<usize>) -> Result<()> {
    let budget = budget_flag.unwrap_or(config.optimize_budget);
    if budget == 0 {
        bail!("optimization budget must be at least 1");
    }
    let params = config.params()?;
    let seed = configured_cycle(config)?;
    let bounds: Vec<PulseBounds> = match &config.optimize_bounds {
        Some(quads) => {
            if quads.len() != seed.pulses.len() {
                bail!(
                    "optimize.pulses has {} slots but the seed cycle has {} pulses",
                    quads.len(),
                    seed.pulses.len()
                );
            }
            quads
                .iter()
                .map(|&(dlo, dhi, tlo, thi)| PulseBounds { delta: (dlo, dhi), duration: (tlo, thi) })
                .collect()
        }
        None => seed
            .pulses
            .iter()
            .map(|p| {
                // Same-sign box around the seed: detunings stay on their side
                // of the carrier, durations within a factor of eight.
                let delta = if p.delta < 0.0 {
                    ((p.delta - 6.0), (p.delta + 6.0).min(-1.0))
                } else {
                    ((p.delta - 6.0).max(1.0), p.delta + 6.0)
                };
                PulseBounds { delta, duration: (p.duration / 8.0, p.duration * 8.0) }
            })
            .collect(),
    };
    let mut seeds = vec![seed.clone()];
    if let Ok(mut auto) = build_cycle(SchemeId::Auto, config.eta, &params) {
        auto.n_cycles = seed.n_cycles;
        if auto.pulses.len() == seed.pulses.len() && auto.pulses != seed.pulses {
            seeds.push(auto);
        }
    }
    let max_bound_delta = bounds
        .iter()
        .flat_map(|b| [b.delta.0.abs(), b.delta.1.abs()])
        .fold(0.0, f64::max);
    let n_max = config
        .n_max
        .unwrap_or_else(|| trapcool::auto_n_max(initial_support(config), max_bound_delta, config.eta));
    let initial = initial_vector(config, n_max)?;

    let problem = OptimizationProblem {
        bounds,
        params,
        initial,
        n_cycles: seed.n_cycles,
        budget,
        seeds,
        n_max,
        quad_order: config.quad_order,
    };
    let outcome = optimize_sequence(&problem)?;

    let log_csv = config.out_dir.join("optimize_log.csv");
    let mut w = CsvWriter::create(
        &log_csv,
        "trapcool.optimize_log.v1",
        &[("budget", format!("{budget}")), ("n_max", format!("{n_max}"))],
    )?;
    w.header("evaluation,p0,incumbent_p0,pulses")?;
    for rec in &outcome.log {
        let pulses: Vec<String> =
            rec.cycle.pulses.iter().map(|p| format!("({}, {})", p.delta, p.duration)).collect();
        w.row(format_args!(
            "{},{:.12},{:.12},\"[{}]\"",
            rec.index,
            rec.p0,
            rec.incumbent_p0,
            pulses.join(", ")
        ))?;
    }
    w.finish()?;

    for rec in &outcome.log {
        println!(
            "evaluation {:3}: p0 = {:.6}  incumbent = {:.6}",
            rec.index, rec.p0, rec.incumbent_p0
        );
    }
    if outcome.budget_exhausted {
        println!("budget exhausted before the descent converged; best-so-far follows");
    }
    println!("best_p0 = {:.12}", outcome.p0);
    println!("# reusable configuration fragment:");
    let pulses: Vec<String> = outcome
        .best
        .pulses
        .iter()
        .map(|p| format!("({}, {})", p.delta, p.duration))
        .collect();
    println!("cycle.pulses = [{}]", pulses.join(", "));
    println!("run.cycles = {}", outcome.best.n_cycles);
    println!("basis.n_max = {n_max}");
    println!("run.quad_order = {}", config.quad_order);
    Ok(())
}
