use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use teleport_sim_cli::config::{parse_config, Format, RunConfig};
use teleport_sim_cli::{commands, write_atomically, CliError};

#[derive(Parser)]
#[command(name = "teleport-sim", version, about = "Simulate post-selected two-source photonic teleportation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the configured scenarios and write a report.
    Run(Common),
    /// Evaluate a parameter grid and write one row per point.
    Sweep(Common),
    /// Run the invariant suite and print one line per property.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Shift every beamsplitter phase by pi to exercise the suite.
        #[arg(long, hide = true)]
        perturb_beamsplitter: bool,
    },
    /// Simulate polarization tomography of the output beam.
    Tomo(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Override the photon-number cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig, CliError> {
        let mut config = parse_config(self.config.as_deref())?;
        if let Some(out) = &self.out {
            config.out = out.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(format) = self.format {
            config.format = format;
        }
        if let Some(cutoff) = self.cutoff {
            config.setup.cutoff = cutoff;
        }
        config.validate()?;
        Ok(config)
    }
}

fn emit(config: &RunConfig, artifacts: &commands::Artifacts) -> Result<(), CliError> {
    for line in &artifacts.summary {
        println!("{line}");
    }
    if !artifacts.files.is_empty() {
        for path in write_atomically(&config.out, &artifacts.files)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run(c) => {
            let config = c.load()?;
            emit(&config, &commands::run(&config)?)?;
        }
        Command::Sweep(c) => {
            let config = c.load()?;
            emit(&config, &commands::sweep(&config)?)?;
        }
        Command::Validate { common, perturb_beamsplitter } => {
            let config = common.load()?;
            let (report, mut artifacts) = commands::validate(&config, perturb_beamsplitter)?;
            // results go to the terminal; a file only when an output directory is given
            if common.out.is_none() {
                artifacts.files.clear();
            }
            emit(&config, &artifacts)?;
            return Ok(report.all_passed());
        }
        Command::Tomo(c) => {
            let config = c.load()?;
            emit(&config, &commands::tomo(&config)?.1)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
