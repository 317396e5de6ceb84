//! Command-line front end: distances, single estimations, Monte Carlo
//! studies and synthetic data generation.
//!
//! Exit codes: 0 on success, 1 on domain errors (solver failures,
//! infeasible targets), 2 on usage errors (bad flags, unreadable or
//! malformed configs and inputs). Every error prints one machine-parsable
//! line `error[<code>] <message>` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spectral_transport::error::Error;
use spectral_transport::montecarlo::{run_study, write_error_curves_csv, ExperimentConfig};
use spectral_transport::run::{
    run_estimate, run_simulate, with_header, EstimateConfig, MethodName, SimulateConfig,
};
use spectral_transport::transport::{hellinger_distance, transport_distance};
use spectral_transport::MatrixGrid;

#[derive(Parser)]
#[command(
    name = "spectral-transport",
    version,
    about = "Transport-distance spectral estimation toolkit",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Print progress details on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Distance between two spectra stored as MatrixGrid JSON files.
    Distance {
        /// First spectrum (psd grid JSON).
        #[arg(long)]
        phi_x: PathBuf,
        /// Second spectrum (psd grid JSON).
        #[arg(long)]
        phi_y: PathBuf,
        /// Optional weight grid JSON; identity when omitted.
        #[arg(long)]
        omega: Option<PathBuf>,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// One spectral estimation described by a JSON config.
    Estimate {
        /// Problem config (method, bank, sigma source, prior, h_inv, solver).
        #[arg(long)]
        config: PathBuf,
        /// Result destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config's estimation method.
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
    },
    /// Monte Carlo study described by a JSON config.
    Montecarlo {
        /// Study config (counts, orders, bounds, seed, solver).
        #[arg(long)]
        config: PathBuf,
        /// Report destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write aggregate error curves as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Override the config RNG seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Synthetic measurement record from filter specs.
    Simulate {
        /// Simulation config (shaping filter, optional h_inv, length, seed).
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Estimation method as a flag value.
#[derive(Debug, Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    Transport,
    Is,
    IsWeighted,
}

impl From<MethodArg> for MethodName {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Transport => MethodName::Transport,
            MethodArg::Is => MethodName::Is,
            MethodArg::IsWeighted => MethodName::IsWeighted,
        }
    }
}

/// Error class driving the exit code.
enum Failure {
    /// Unreadable or malformed configs/inputs: exit 2.
    Usage(String),
    /// Everything that failed after the inputs parsed: exit 1.
    Domain(String),
}

impl Failure {
    fn report(&self) -> ExitCode {
        let (code, message) = match self {
            Failure::Usage(m) => ("config", m),
            Failure::Domain(m) => ("domain", m),
        };
        let one_line = message.replace('\n', " ");
        eprintln!("error[{code}] {one_line}");
        match self {
            Failure::Usage(_) => ExitCode::from(2),
            Failure::Domain(_) => ExitCode::from(1),
        }
    }
}

fn load_json_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("malformed config {}: {e}", path.display())))
}

fn load_grid(path: &Path) -> Result<MatrixGrid, Failure> {
    MatrixGrid::read_json_file(path)
        .map_err(|e| Failure::Usage(format!("cannot load grid {}: {e}", path.display())))
}

fn write_output(value: &serde_json::Value, output: Option<&Path>) -> Result<(), Failure> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Failure::Domain(e.to_string()))?;
    match output {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn domain(e: Error) -> Failure {
    Failure::Domain(e.to_string())
}

fn cmd_distance(
    phi_x: &Path,
    phi_y: &Path,
    omega: Option<&Path>,
    output: Option<&Path>,
    verbose: bool,
) -> Result<(), Failure> {
    let phi_x = load_grid(phi_x)?;
    let phi_y = load_grid(phi_y)?;
    let report = match omega {
        Some(path) => {
            let omega = load_grid(path)?;
            transport_distance(&phi_x, &phi_y, &omega).map_err(domain)?
        }
        None => hellinger_distance(&phi_x, &phi_y).map_err(domain)?,
    };
    if verbose {
        eprintln!("d = {:.6e} (d^2 = {:.6e})", report.d, report.d_squared);
    }
    write_output(&with_header(&report).map_err(domain)?, output)
}

fn cmd_estimate(
    config: &Path,
    output: Option<&Path>,
    method: Option<MethodArg>,
    verbose: bool,
) -> Result<(), Failure> {
    let mut config: EstimateConfig = load_json_config(config)?;
    if let Some(m) = method {
        config.method = m.into();
    }
    let result = run_estimate(&config).map_err(domain)?;
    if verbose {
        eprintln!(
            "method {:?}: status {:?}, {} iterations, moment residual {:.3e}",
            result.method, result.status, result.iterations, result.moment_residual
        );
    }
    write_output(&with_header(&result).map_err(domain)?, output)?;
    if !result.converged {
        return Err(Failure::Domain(format!(
            "solver did not converge (status {:?}, gradient norm {:.3e}); diagnostics written",
            result.status, result.grad_norm
        )));
    }
    Ok(())
}

fn cmd_montecarlo(
    config: &Path,
    output: Option<&Path>,
    csv: Option<&Path>,
    seed: Option<u64>,
    verbose: bool,
) -> Result<(), Failure> {
    let mut config: ExperimentConfig = load_json_config(config)?;
    if let Some(seed) = seed {
        config.rng_seed = seed;
    }
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    if verbose {
        eprintln!(
            "running {} experiments (m={}, l={}, grid {})",
            config.n_experiments, config.m, config.l, config.grid_points
        );
    }
    let report = run_study(&config).map_err(domain)?;
    eprintln!(
        "mean L2 error, transport: {:.4} (reference {:.2})",
        report.aggregate.mean_l2_transport, report.reference_mean_l2_transport
    );
    eprintln!(
        "mean L2 error, IS:        {:.4} (reference {:.2})",
        report.aggregate.mean_l2_is, report.reference_mean_l2_is
    );
    if !report.excluded_runs.is_empty() {
        eprintln!(
            "{} run(s) excluded from aggregates:",
            report.excluded_runs.len()
        );
        for ex in &report.excluded_runs {
            eprintln!("  run {}: {}", ex.index, ex.reason);
        }
    }
    if let Some(path) = csv {
        let file = std::fs::File::create(path)
            .map_err(|e| Failure::Domain(format!("cannot write {}: {e}", path.display())))?;
        write_error_curves_csv(&report, file).map_err(domain)?;
    }
    write_output(&with_header(&report).map_err(domain)?, output)
}

fn cmd_simulate(config: &Path, output: Option<&Path>, seed: Option<u64>) -> Result<(), Failure> {
    let mut config: SimulateConfig = load_json_config(config)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let record = run_simulate(&config).map_err(domain)?;
    match output {
        Some(path) => record.to_csv_path(path).map_err(domain),
        None => {
            let mut buf = Vec::new();
            record.to_csv_writer(&mut buf).map_err(domain)?;
            print!("{}", String::from_utf8_lossy(&buf));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Distance {
            phi_x,
            phi_y,
            omega,
            output,
        } => cmd_distance(phi_x, phi_y, omega.as_deref(), output.as_deref(), cli.verbose),
        Command::Estimate {
            config,
            output,
            method,
        } => cmd_estimate(config, output.as_deref(), *method, cli.verbose),
        Command::Montecarlo {
            config,
            output,
            csv,
            seed,
        } => cmd_montecarlo(config, output.as_deref(), csv.as_deref(), *seed, cli.verbose),
        Command::Simulate {
            config,
            output,
            seed,
        } => cmd_simulate(config, output.as_deref(), *seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => failure.report(),
    }
}
