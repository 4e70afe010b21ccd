//! `floqsens` — run declarative Floquet-sensing experiments and emit plot-ready tables.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical breach (truncation, band
//! tracking or another numerical failure during the run).

mod config;
mod output;
mod run;

use clap::{Args, Parser, Subcommand};
use config::{ConfigError, Experiment, RunConfig};
use floqsens::floquet::{gallery, model_library, ModelParams};
use floqsens::Error;
use output::{sha256_hex, Artifacts, Manifest};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

const EXIT_CONFIG: u8 = 2;
const EXIT_BREACH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "floqsens",
    version,
    about = "Two-tone Floquet quantum-sensing experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long, env = "FLOQSENS_THREADS")]
    threads: Option<usize>,
    /// Output directory (default: the config's "out", else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Quasienergy bands and their phase derivatives on the grid.
    Bands(RunArgs),
    /// Power-operator spectra per grid point and the functional power operator of the input.
    Power(RunArgs),
    /// Evolve the ancilla–drive state and project out the path-entangled state.
    Evolve(RunArgs),
    /// QFI time series of the path-entangled state with its band bounds.
    Qfi(RunArgs),
    /// Parity signal and Fisher information over θ̃ at each time.
    Parity(RunArgs),
    /// Parity sensitivity exponent Δθ̃ ∼ T^x and the critical-point verdict.
    Scaling(RunArgs),
    /// Photon-loss sweep of probe states.
    Loss(RunArgs),
    /// Bayesian estimation with a Gaussian prior.
    Bayes(RunArgs),
    /// Energy transfer under dephasing or frequency noise.
    Noise(RunArgs),
    /// Parity sensitivity under a common drive detuning.
    Detune(RunArgs),
    /// Ancilla-phase optimisation of the QFI.
    Optimize(RunArgs),
    /// Lattice model against the full quantized model.
    Validate(RunArgs),
    /// List the built-in models with their Hamiltonians and parameters.
    ListModels {
        /// Show a single model.
        #[arg(long)]
        model: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::ListModels { model } => return list_models(model.as_deref()),
        Command::Bands(a) => (Experiment::Bands, a),
        Command::Power(a) => (Experiment::Power, a),
        Command::Evolve(a) => (Experiment::Evolve, a),
        Command::Qfi(a) => (Experiment::Qfi, a),
        Command::Parity(a) => (Experiment::Parity, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
        Command::Loss(a) => (Experiment::Loss, a),
        Command::Bayes(a) => (Experiment::Bayes, a),
        Command::Noise(a) => (Experiment::Noise, a),
        Command::Detune(a) => (Experiment::Detune, a),
        Command::Optimize(a) => (Experiment::Optimize, a),
        Command::Validate(a) => (Experiment::Validate, a),
    };
    execute(experiment, args)
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn execute(experiment: Experiment, args: RunArgs) -> ExitCode {
    let text = match std::fs::read(&args.config) {
        Ok(t) => t,
        Err(e) => return config_error(format!("cannot read {}: {e}", args.config.display())),
    };
    let config_sha256 = sha256_hex(&text);
    let parsed = std::str::from_utf8(&text)
        .map_err(|e| ConfigError(format!("config is not UTF-8: {e}")))
        .and_then(RunConfig::parse)
        .and_then(|c| c.prepare(experiment));
    let prepared = match parsed {
        Ok(p) => p,
        Err(e) => return config_error(e),
    };
    let threads = match args.threads {
        Some(0) => return config_error("--threads must be positive"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
    {
        return config_error(format!("cannot start {threads} threads: {e}"));
    }
    let out_dir = args
        .out
        .or_else(|| prepared.config.out.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return config_error(format!("cannot create {}: {e}", out_dir.display()));
    }

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let mut artifacts = Artifacts::default();
    let result = run::run(&prepared, &mut artifacts);
    let (status, error, summary, code) = match result {
        Ok(summary) => ("ok", None, summary, ExitCode::SUCCESS),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidArgument(_)
                | Error::UnknownModel { .. }
                | Error::MissingParameter { .. }
                | Error::Unsupported(_)
                | Error::NonCommensurate { .. } => {
                    return ExitCode::from(EXIT_CONFIG);
                }
                _ => ExitCode::from(EXIT_BREACH),
            };
            (
                "numerical-breach",
                Some(e.to_string()),
                serde_json::Value::Null,
                code,
            )
        }
    };
    let outputs = match artifacts.write_all(&out_dir) {
        Ok(o) => o,
        Err(e) => return config_error(format!("cannot write outputs: {e}")),
    };
    let manifest = Manifest {
        tool: "floqsens",
        library_version: floqsens::VERSION,
        experiment: experiment.name(),
        config_path: args.config.display().to_string(),
        config_sha256,
        seed: prepared.config.seed,
        threads,
        status,
        error,
        started_unix_s: started,
        wall_time_s: clock.elapsed().as_secs_f64(),
        outputs,
        summary,
    };
    if let Err(e) = manifest.write(&out_dir) {
        return config_error(format!("cannot write manifest: {e}"));
    }
    code
}

fn list_models(only: Option<&str>) -> ExitCode {
    let all = gallery();
    if let Some(name) = only {
        if !all.iter().any(|m| m.name == name) {
            // The library computes the nearest-name suggestion.
            let msg = model_library(name, &ModelParams::new())
                .err()
                .map_or_else(|| format!("unknown model '{name}'"), |e| e.to_string());
            eprintln!("{msg}");
            eprintln!(
                "available: {}",
                all.iter().map(|m| m.name).collect::<Vec<_>>().join(", ")
            );
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    println!("model\tanchor\tparameters\tdescription");
    for m in all.iter().filter(|m| only.is_none_or(|n| n == m.name)) {
        let params: Vec<String> = m
            .params
            .iter()
            .map(|(k, v, meaning)| format!("{k}={v} ({meaning})"))
            .collect();
        println!(
            "{}\t{}\t{}\t{}",
            m.name,
            m.hamiltonian,
            params.join("; "),
            m.summary
        );
    }
    ExitCode::SUCCESS
}
