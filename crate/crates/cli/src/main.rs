use std::path::PathBuf;
use std::process::ExitCode;

use bgk_spectral_cli::{run, summary, CliError, RunConfig, Sweep};
use clap::Parser;

/// Spectral linear BGK runs: norms, conserved quantities, snapshots,
/// recurrence tables and operator-norm sweeps as CSV.
#[derive(Debug, Parser)]
#[command(version)]
struct Args {
    /// TOML run configuration.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// `param=v1,v2,...`; each value runs concurrently in its own
    /// subdirectory.
    #[arg(long)]
    sweep: Option<String>,
    /// Print a preset as TOML and exit.
    #[arg(long)]
    dump_preset: Option<String>,
}

fn main_inner(args: Args) -> Result<(), CliError> {
    if let Some(name) = &args.dump_preset {
        print!("{}", RunConfig::preset(name)?.to_toml());
        return Ok(());
    }
    let cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(CliError::Config("one of --config or --preset is required".into())),
    };
    let sweep = args.sweep.as_deref().map(Sweep::parse).transpose()?;
    for (label, out) in run(&cfg, sweep.as_ref(), &args.out_dir)? {
        if label.is_empty() {
            println!("{}", summary(&out));
        } else {
            println!("[{label}] {}", summary(&out));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
