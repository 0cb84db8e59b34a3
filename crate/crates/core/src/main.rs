use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spinmem::memory::Method;
use spinmem::runner::{self, Command, Figure, Overrides};
use spinmem::spectral::DiscretizationScheme;
use spinmem::Error;

/// Driven spin-ensemble quantum memory simulator.
#[derive(Parser)]
#[command(name = "spinmem", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n_spins: Option<usize>,
    /// quantile | grid
    #[arg(long, global = true)]
    scheme: Option<DiscretizationScheme>,
    /// eigen | bromwich
    #[arg(long, global = true)]
    method: Option<Method>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Spin line densities on a frequency grid.
    Spectrum,
    /// Cavity transmission |t(ω)|².
    Transmission,
    /// Vacuum Rabi signal starting from one cavity photon.
    Rabi,
    /// Storage fidelity curve.
    Memory,
    /// Optimal cavity detuning at the target time.
    Optimize,
    /// Data behind one of the reference figures.
    Reproduce {
        /// fig2 | fig3 | fig4
        figure: Figure,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(cli: Cli) -> Result<(), Error> {
    let c = cli.common;
    if let Some(k) = c.threads {
        if k == 0 {
            return Err(Error::Validation {
                name: "threads",
                reason: "must be >= 1".into(),
            });
        }
        spinmem::parallel::set_threads(k);
    }
    let command = match cli.command {
        Cmd::Spectrum => Command::Spectrum,
        Cmd::Transmission => Command::Transmission,
        Cmd::Rabi => Command::Rabi,
        Cmd::Memory => Command::Memory,
        Cmd::Optimize => Command::Optimize,
        Cmd::Reproduce { figure } => Command::Reproduce(figure),
    };
    let overrides = Overrides {
        n_spins: c.n_spins,
        scheme: c.scheme,
        method: c.method,
        seed: c.seed,
    };
    let manifest = match (&c.config, command) {
        (Some(path), _) => runner::run_file(command, path, &overrides, &c.out)?,
        (None, Command::Reproduce(f)) => runner::run(command, f.default_config(), &overrides, &c.out)?,
        (None, _) => {
            return Err(Error::Validation {
                name: "config",
                reason: "--config is required for this command".into(),
            })
        }
    };
    for line in &manifest.summary {
        println!("{line}");
    }
    println!("wrote {} files to {}", manifest.outputs.len(), c.out.display());
    Ok(())
}
