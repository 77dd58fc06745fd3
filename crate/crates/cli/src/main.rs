use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rdfrl_cli::artifacts::{load_config_or_manifest, write_file};
use rdfrl_cli::plot::{cmd_plot, PlotKind};
use rdfrl_cli::run::cmd_run;
use rdfrl_cli::sweep::{cmd_sweep, SweepKind};
use rdfrl_cli::{init_workers, CliError, CliResult};

#[derive(Parser)]
#[command(name = "rdfrl", version, about = "Robust decision-focused model-based RL experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every configured method. Accepts a config or a manifest.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run one sweep: lambda, gridsize, nonident or delta-lambda.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        kind: SweepKind,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a results.csv as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> CliResult<()> {
    init_workers()?;
    match cli.command {
        Command::Run { config, out_dir } => {
            let cfg = load_config_or_manifest(&config)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir());
            let m = cmd_run(&cfg, &dir)?;
            println!("wrote {} artifacts to {}", m.artifacts.len() + 1, dir.display());
        }
        Command::Sweep { config, kind, out_dir } => {
            let cfg = load_config_or_manifest(&config)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output_dir());
            cmd_sweep(&cfg, kind, &dir)?;
            println!("wrote {} sweep to {}", kind.name(), dir.display());
        }
        Command::Plot { csv, kind, out } => {
            let text = std::fs::read_to_string(&csv).map_err(|e| CliError::io(&csv, e))?;
            write_file(&out, cmd_plot(&text, kind)?.as_bytes())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
