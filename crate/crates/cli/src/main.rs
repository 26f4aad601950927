//! Command-line front end for the transverse-field Ising quench toolkit.
//!
//! Every subcommand reads one JSON config, writes its tables under the
//! output directory in the chosen format, and finishes with a manifest
//! recording the config hash, seed, and output inventory.

mod commands;
mod config;
mod out;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfim_core::{Error, Result};

use crate::out::{Format, Sink};

const QUENCH_HELP: &str = "\
Simulate a quench and record the squared total magnetization.

Writes observables.{csv,json} with columns
  s, tag, alpha, mean, stderr, shots
where tag is `raw` or `na` (noise amplified) and alpha the amplification
factor. With shots > 0 the per-shot archive shots_raw (and shots_na when a
zero-noise-extrapolation plan is configured) holds
  s, tag, alpha, shot, seed, bits, herald_mask, m
with bits and herald_mask in hex and m the herald count. A configured plan
also writes plan.json with the shot split.";

const MITIGATE_HELP: &str = "\
Mitigate archived shots: leakage regression per series, then zero-noise
extrapolation across the raw and amplified series.

Reads the archives written by `quench` and writes mitigation.{csv,json} with
columns
  s, raw, raw_sigma, na, na_sigma, znr, znr_sigma, znr_method,
  zne_znr, zne_znr_sigma, zne_method
plus mitigation_report.json echoing the extrapolation plan.";

const SPD_HELP: &str = "\
Propagate the squared total magnetization in the Heisenberg picture with
sparse Pauli dynamics at a ladder of truncation thresholds.

Writes observables.{csv,json} with columns
  delta_exponent, s, value
and telemetry.{csv,json} with columns
  delta_exponent, s, terms, truncated_mass, wall_ms, canonicalized
plus spd_report.json with per-threshold growth summaries.";

const CB_HELP: &str = "\
Run cycle benchmarking of the entangling gate against a known injected
channel and fit the Pauli error probabilities.

Writes decays.{csv,json} with columns
  length, pauli, mean, stderr, kept
fit.{csv,json} with columns
  pauli, fidelity, fidelity_sigma, probability, probability_sigma, amplitude
and noise_model.json, a reusable channel description. Exits 4 when fewer
than 14 of the 15 probabilities land within three sigma of the injection.";

const HYDRO_HELP: &str = "\
Fit an energy-transport diffusion constant from the decay of domain-wall
Fourier modes, from either the synthetic model or a statevector quench.

Writes modes.{csv,json} with columns
  s, n, q, amp, sigma
and rates.{csv,json} with columns
  n, q, q_squared, gamma, sigma, points_used
plus summary.json, and prints `D = <value> +- <sigma>`.";

const MAGNUS_HELP: &str = "\
Report the step-size-corrected effective Hamiltonian and check that halving
the Trotter step shrinks the Floquet eigenphase mismatch.

Writes hamiltonian.{csv,json} with columns
  pauli, coefficient
plus summary.json with the mismatch at dt and dt/2 and their ratio.";

#[derive(Parser)]
#[command(
    name = "tfim",
    version,
    about = "Digitized transverse-field Ising quenches: simulation, noise \
             learning, mitigation, and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; omit to run with defaults.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed, overriding the config's seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (or set TFIM_OUT_DIR).
    #[arg(long)]
    out_dir: Option<PathBuf>,

    /// Table format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,

    /// Worker threads (or set TFIM_THREADS); defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    #[command(long_about = QUENCH_HELP)]
    Quench(Common),
    #[command(long_about = MITIGATE_HELP)]
    Mitigate(Common),
    #[command(long_about = SPD_HELP)]
    Spd(Common),
    #[command(long_about = CB_HELP)]
    Cb(Common),
    #[command(long_about = HYDRO_HELP)]
    Hydro(Common),
    #[command(long_about = MAGNUS_HELP)]
    Magnus(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Quench(c)
            | Command::Mitigate(c)
            | Command::Spd(c)
            | Command::Cb(c)
            | Command::Hydro(c)
            | Command::Magnus(c) => c,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Command::Quench(_) => "quench",
            Command::Mitigate(_) => "mitigate",
            Command::Spd(_) => "spd",
            Command::Cb(_) => "cb",
            Command::Hydro(_) => "hydro",
            Command::Magnus(_) => "magnus",
        }
    }
}

fn resolve_out_dir(common: &Common) -> PathBuf {
    common
        .out_dir
        .clone()
        .or_else(|| std::env::var_os("TFIM_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn resolve_threads(common: &Common) -> Result<Option<usize>> {
    if let Some(n) = common.threads {
        return Ok(Some(n));
    }
    match std::env::var("TFIM_THREADS") {
        Ok(text) => text
            .parse()
            .map(Some)
            .map_err(|_| Error::config(format!("TFIM_THREADS is not a count: {text:?}"))),
        Err(_) => Ok(None),
    }
}

fn execute(command: &Command) -> Result<()> {
    let common = command.common();
    let format = Format::parse(&common.format)?;
    if let Some(threads) = resolve_threads(common)? {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::config(format!("thread pool: {e}")))?;
    }
    let mut sink = Sink::new(&resolve_out_dir(common), format)?;

    let (hash, seed) = match command {
        Command::Quench(c) => {
            let (cfg, hash) = config::load::<config::QuenchConfig>(c.config.as_deref())?;
            let seed = c.seed.unwrap_or(cfg.seed);
            commands::quench::run(&cfg, seed, &mut sink)?;
            (hash, seed)
        }
        Command::Mitigate(c) => {
            let (cfg, hash) = config::load::<config::MitigateConfig>(c.config.as_deref())?;
            let seed = c.seed.unwrap_or(cfg.seed);
            commands::mitigate::run(&cfg, seed, &mut sink)?;
            (hash, seed)
        }
        Command::Spd(c) => {
            let (cfg, hash) = config::load::<config::SpdConfig>(c.config.as_deref())?;
            let seed = c.seed.unwrap_or(0);
            commands::spd::run(&cfg, &mut sink)?;
            (hash, seed)
        }
        Command::Cb(c) => {
            let (cfg, hash) = config::load::<config::CbCommandConfig>(c.config.as_deref())?;
            let seed = c.seed.unwrap_or(cfg.seed);
            commands::cb::run(&cfg, seed, &mut sink)?;
            (hash, seed)
        }
        Command::Hydro(c) => {
            let (cfg, hash) = config::load::<config::HydroConfig>(c.config.as_deref())?;
            let seed = c.seed.unwrap_or(cfg.seed);
            commands::hydro::run(&cfg, seed, &mut sink)?;
            (hash, seed)
        }
        Command::Magnus(c) => {
            let (cfg, hash) = config::load::<config::MagnusConfig>(c.config.as_deref())?;
            let seed = c.seed.unwrap_or(0);
            commands::magnus::run(&cfg, &mut sink)?;
            (hash, seed)
        }
    };
    sink.finish(command.name(), &hash, seed)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parse(_) => 2,
                Error::Resource(_) => 3,
                Error::FitFailure(_) => 4,
                Error::Io(_) => 1,
            })
        }
    }
}
