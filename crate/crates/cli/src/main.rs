use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use grapheneqg_cli::{parse_config, run_command, CliError, Command, Overrides};

/// Band structures of Bernal-stacked multilayer graphene quantum graphs.
#[derive(Debug, Parser)]
#[command(name = "grapheneqg", version)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Interlayer coupling; overrides `t0`.
    #[arg(long)]
    t0: Option<f64>,
    /// Number of layers (2 or 3); overrides `layers`.
    #[arg(long)]
    layers: Option<u32>,
    /// Quasimomentum grid as N1xN2; overrides `grid`.
    #[arg(long)]
    grid: Option<String>,
}

fn run(args: Args) -> Result<String, CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| CliError::io(&args.config, e))?;
    let overrides = Overrides {
        out: args.out,
        t0: args.t0,
        layers: args.layers,
        grid: args.grid,
    };
    let config = parse_config(&text)?.with_overrides(&overrides)?;
    let bundle = run_command(args.command, &config)?;
    Ok(format!(
        "{}: wrote {} files and bundle.json to {}",
        args.command,
        bundle.files.len(),
        config.output_dir.display()
    ))
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
