//! `thetainv`: configuration-driven pipeline for recovering spectral data
//! (and a parametrised potential) from the boundary spectral function of a
//! discrete Neumann operator.

mod config;
mod error;
mod io;
mod pipeline;

pub use error::CliError;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::pipeline::{Context, Manifest};

#[derive(Parser)]
#[command(name = "thetainv", version, about = "Boundary spectral data toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: interval_q0, square_degenerate, rect_recover.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Override the configured random seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline.
    Run(CommonArgs),
    /// Solve the forward eigenproblem (writes eigensystem.csv).
    Forward(CommonArgs),
    /// Sample the boundary spectral function (writes theta.csv).
    Synthesize(CommonArgs),
    /// Extract eigenvalues and squared traces from theta (writes extracted.csv).
    Extract(CommonArgs),
    /// Lift squared traces to signed ones (writes traces_signed.csv, zeros.csv).
    Lift(CommonArgs),
    /// Assemble Neumann-to-Dirichlet maps (writes ndmap_<k>.csv).
    Ndmap(CommonArgs),
    /// Fit potential coefficients to the extracted data (writes reconstruction.json).
    Reconstruct(CommonArgs),
    /// Run the orthogonality probe against the [probe] potential (writes probe.json).
    Probe(CommonArgs),
}

fn preset_text(name: &str) -> Option<&'static str> {
    match name {
        "interval_q0" => Some(include_str!("../presets/interval_q0.toml")),
        "square_degenerate" => Some(include_str!("../presets/square_degenerate.toml")),
        "rect_recover" => Some(include_str!("../presets/rect_recover.toml")),
        _ => None,
    }
}

fn load_config(args: &CommonArgs) -> Result<RunConfig, CliError> {
    let text = match (&args.config, &args.preset) {
        (Some(path), None) => {
            if !path.exists() {
                return Err(CliError::MissingInput(path.display().to_string()));
            }
            std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(path.display().to_string(), e))?
        }
        (None, Some(name)) => preset_text(name)
            .ok_or_else(|| CliError::ConfigInvalid(format!("unknown preset {name:?}")))?
            .to_string(),
        _ => {
            return Err(CliError::ConfigInvalid(
                "exactly one of --config and --preset is required".into(),
            ))
        }
    };
    let mut cfg = RunConfig::parse(&text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn dispatch(cmd: &Command) -> Result<(), CliError> {
    let (args, run): (
        &CommonArgs,
        fn(&Context, &mut Manifest) -> Result<(), CliError>,
    ) = match cmd {
        Command::Run(a) => (a, pipeline::run_all),
        Command::Forward(a) => (a, pipeline::stage_forward),
        Command::Synthesize(a) => (a, pipeline::stage_synthesize),
        Command::Extract(a) => (a, pipeline::stage_extract),
        Command::Lift(a) => (a, pipeline::stage_lift),
        Command::Ndmap(a) => (a, pipeline::stage_ndmap),
        Command::Reconstruct(a) => (a, pipeline::stage_reconstruct),
        Command::Probe(a) => (a, pipeline::stage_probe),
    };
    let config = load_config(args)?;
    let seed = config.seed;
    let ctx = Context::new(config, &args.out)?;
    let mut manifest = Manifest::new(seed);
    run(&ctx, &mut manifest)?;
    manifest.write(&ctx.out)?;
    for stage in &manifest.stages {
        println!(
            "{}: {} ({:.3}s)",
            stage.name,
            stage.outputs.join(", "),
            stage.seconds
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
