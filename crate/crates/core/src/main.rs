use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use qudit_teleport::cli::verify::{run_verify, Depth};
use qudit_teleport::cli::{
    cmd_discriminate, cmd_simulate_with_branches, cmd_sweep, exit_code_for, parse_spectrum,
    OutputFormat, RunConfig, SweepGrid, EXIT_OK, EXIT_USAGE, EXIT_VERIFY_FAILED,
};
use qudit_teleport::error::{Error, Result};
use qudit_teleport::teleport::CorrectionStrategy;

#[derive(Parser)]
#[command(
    name = "qudit-teleport",
    version,
    about = "Conclusive teleportation of qudit states through non-maximally entangled channels"
)]
struct Cli {
    /// Worker threads for Monte Carlo estimation (default: all cores).
    /// Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one channel and correction strategy, reporting analytic,
    /// exact and Monte Carlo fidelities.
    Simulate(SimulateArgs),
    /// Print the optimal discrimination plan for a channel.
    Discriminate(DiscriminateArgs),
    /// Sweep the minimal squared Schmidt coefficient and tabulate
    /// fidelities as CSV.
    Sweep(SweepArgs),
    /// Run the cross-module verification suite.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SpectrumArgs {
    /// Qudit dimension; required with a named preset, otherwise inferred
    /// from the coefficient list.
    #[arg(long)]
    d: Option<usize>,

    /// Comma-separated Schmidt amplitudes, or the preset 'maximal'.
    #[arg(long)]
    spectrum: String,

    /// Interpret the spectrum values as squared amplitudes.
    #[arg(long)]
    amp2: bool,

    /// Rescale the coefficients so their squares sum to 1.
    #[arg(long)]
    renormalize: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,

    /// Correction strategy: none, x or xz.
    #[arg(long, default_value = "none")]
    strategy: String,

    /// Monte Carlo trials.
    #[arg(long, default_value_t = 10_000)]
    trials: usize,

    /// Seed for all sampled quantities; falls back to QT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,

    /// Output path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,

    /// Report format: json or csv.
    #[arg(long, default_value = "json")]
    format: String,

    /// Include every measurement branch for one seeded input in the JSON
    /// report.
    #[arg(long)]
    emit_branches: bool,
}

#[derive(Args)]
struct DiscriminateArgs {
    #[command(flatten)]
    spectrum: SpectrumArgs,

    /// Also run the grid-search feasibility oracle.
    #[arg(long)]
    oracle: bool,

    /// Grid resolution for the oracle.
    #[arg(long, default_value_t = 0.005)]
    resolution: f64,

    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Qudit dimension.
    #[arg(long)]
    d: usize,

    /// Smallest squared minimal coefficient on the grid.
    #[arg(long, default_value_t = 0.01)]
    amin2_start: f64,

    /// Largest squared minimal coefficient; defaults to 1/d.
    #[arg(long)]
    amin2_stop: Option<f64>,

    /// Number of grid points.
    #[arg(long, default_value_t = 25)]
    steps: usize,

    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// quick (seconds) or full (the complete parameter set).
    #[arg(long, default_value = "quick")]
    depth: String,

    /// Seed for the randomized sweeps; falls back to QT_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    output: Option<PathBuf>,
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("QT_SEED") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Error::InvalidConfig(format!("QT_SEED value '{raw}' is not a u64"))),
        Err(_) => Ok(0),
    }
}

fn emit(output: &Option<PathBuf>, content: &str) -> Result<()> {
    match output {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => fs::write(path, content)
            .map_err(|e| Error::InvalidConfig(format!("cannot write {}: {e}", path.display()))),
    }
}

fn build_config(
    spectrum_args: &SpectrumArgs,
    strategy: CorrectionStrategy,
    trials: usize,
    seed: u64,
    output: &Option<PathBuf>,
    format: OutputFormat,
) -> Result<RunConfig> {
    let (spectrum, preset) = parse_spectrum(
        &spectrum_args.spectrum,
        spectrum_args.d,
        spectrum_args.amp2,
        spectrum_args.renormalize,
    )?;
    if preset {
        eprintln!(
            "expanded spectrum preset '{}' to {:?}",
            spectrum_args.spectrum,
            spectrum.coeffs()
        );
    }
    Ok(RunConfig {
        d: spectrum.d(),
        spectrum: spectrum.coeffs().to_vec(),
        strategy,
        trials,
        seed,
        output: output.as_ref().map(|p| p.display().to_string()),
        format,
    })
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Simulate(args) => {
            let strategy: CorrectionStrategy = args.strategy.parse()?;
            let format: OutputFormat = args.format.parse()?;
            let seed = resolve_seed(args.seed)?;
            let config = build_config(
                &args.spectrum,
                strategy,
                args.trials,
                seed,
                &args.output,
                format,
            )?;
            let report = cmd_simulate_with_branches(&config, args.emit_branches)?;
            emit(&args.output, &report)?;
            Ok(EXIT_OK)
        }
        Command::Discriminate(args) => {
            let seed = resolve_seed(None)?;
            let config = build_config(
                &args.spectrum,
                CorrectionStrategy::NoCorrection,
                0,
                seed,
                &args.output,
                OutputFormat::Json,
            )?;
            let resolution = args.oracle.then_some(args.resolution);
            let report = cmd_discriminate(&config, resolution)?;
            emit(&args.output, &report)?;
            Ok(EXIT_OK)
        }
        Command::Sweep(args) => {
            let grid = SweepGrid {
                amin2_start: args.amin2_start,
                amin2_stop: args.amin2_stop.unwrap_or(1.0 / args.d as f64),
                steps: args.steps,
            };
            let table = cmd_sweep(args.d, &grid)?;
            emit(&args.output, &table)?;
            Ok(EXIT_OK)
        }
        Command::Verify(args) => {
            let depth: Depth = args.depth.parse()?;
            let seed = resolve_seed(args.seed)?;
            let summary = run_verify(depth, seed, |check| {
                eprintln!(
                    "{} {} ({} ms) {}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.millis,
                    check.detail
                );
            })?;
            let json = format!(
                "{}\n",
                serde_json::to_string_pretty(&summary).expect("serializable summary")
            );
            emit(&args.output, &json)?;
            Ok(if summary.all_passed {
                EXIT_OK
            } else {
                EXIT_VERIFY_FAILED
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };

    let run = || match dispatch(&cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code_for(&err)
        }
    };

    let code = match cli.threads {
        None => run(),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot build thread pool: {e}");
                EXIT_USAGE
            }
        },
    };
    ExitCode::from(code as u8)
}
