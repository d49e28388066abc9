// Copyright 2026 The coulomb-gas authors
//
// Licensed under the Apache license, version 2.0 (the "license");
// you may not use this file except in compliance with the license.
// You may obtain a copy of the license at
//
//     http://www.apache.org/licenses/license-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the license is distributed on an "as is" basis,
// without warranties or conditions of any kind, either express or implied.
// See the license for the specific language governing permissions and
// limitations under the license.


//! Batch front-end for `coulomb-core`.
//!
//! Every subcommand resolves its parameters (flags, then the optional
//! `key = value` config file, then defaults), validates them, and only then
//! creates the output directory. A run writes `manifest.json` first, then its
//! data files, `plot/` data with `plot/index.json`, `report.json`, and finally
//! the completed manifest.

mod commands;
mod output;
mod settings;

use clap::{Args, Parser, Subcommand};
use coulomb_core::error::Error;
use std::ffi::OsString;
use std::path::PathBuf;
use thiserror::Error as ThisError;

pub use settings::{parse_config, parse_f64, parse_f64_list, Settings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable holding the default output directory.
pub const OUT_DIR_ENV: &str = "COULOMB_OUT_DIR";

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Numerical(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Numerical(_) | CliError::Io(_) => EXIT_NUMERICAL,
        }
    }
}

pub(crate) fn number(s: &str) -> Result<f64, String> {
    parse_f64(s)
}

pub(crate) fn number_list(s: &str) -> Result<Vec<f64>, String> {
    parse_f64_list(s)
}

#[derive(Debug, Parser)]
#[command(name = "coulomb", version, about = "Coulomb gases, equilibrium measures and renormalized jellium energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub(crate) struct Common {
    /// `key = value` file; flags take precedence over its entries
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// output directory [default: $COULOMB_OUT_DIR, else ./coulomb-out]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// worker cap; the pipelines run on one thread, so any value gives
    /// bit-identical results
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Equilibrium measure of a confining potential
    Equilibrium {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::EquilibriumArgs,
    },
    /// Meissner field h_0 and the critical parameter λ_Ω
    Meissner {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::MeissnerArgs,
    },
    /// Vortex obstacle problem over a list of λ values
    Obstacle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::ObstacleArgs,
    },
    /// Multi-start minimization of the n-point energy
    Fekete {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::FeketeArgs,
    },
    /// Exact energy splitting check on a random planar configuration
    SplitCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::SplitArgs,
    },
    /// Renormalized energy over the fundamental domain of lattice shapes
    LatticeScan {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::ScanArgs,
    },
    /// Renormalized energy of one lattice by the available methods
    Renorm {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::RenormArgs,
    },
    /// Smeared-charge energy of the simple, body- and face-centred cubic lattices
    Jellium3d {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::Jellium3dArgs,
    },
    /// Metropolis sampling of the Gibbs measure
    Sample {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::SampleArgs,
    },
    /// Thermodynamic-integration estimate of log Z
    FreeEnergy {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        args: commands::FreeEnergyArgs,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Equilibrium { .. } => "equilibrium",
            Command::Meissner { .. } => "meissner",
            Command::Obstacle { .. } => "obstacle",
            Command::Fekete { .. } => "fekete",
            Command::SplitCheck { .. } => "split-check",
            Command::LatticeScan { .. } => "lattice-scan",
            Command::Renorm { .. } => "renorm",
            Command::Jellium3d { .. } => "jellium3d",
            Command::Sample { .. } => "sample",
            Command::FreeEnergy { .. } => "free-energy",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Equilibrium { common, .. }
            | Command::Meissner { common, .. }
            | Command::Obstacle { common, .. }
            | Command::Fekete { common, .. }
            | Command::SplitCheck { common, .. }
            | Command::LatticeScan { common, .. }
            | Command::Renorm { common, .. }
            | Command::Jellium3d { common, .. }
            | Command::Sample { common, .. }
            | Command::FreeEnergy { common, .. } => common,
        }
    }

    fn plan(self, s: &mut Settings) -> Result<commands::Plan, CliError> {
        use commands::Plan;
        Ok(match self {
            Command::Equilibrium { args, .. } => Plan::Equilibrium(args.resolve(s)?),
            Command::Meissner { args, .. } => Plan::Meissner(args.resolve(s)?),
            Command::Obstacle { args, .. } => Plan::Obstacle(args.resolve(s)?),
            Command::Fekete { args, .. } => Plan::Fekete(args.resolve(s)?),
            Command::SplitCheck { args, .. } => Plan::Split(args.resolve(s)?),
            Command::LatticeScan { args, .. } => Plan::Scan(args.resolve(s)?),
            Command::Renorm { args, .. } => Plan::Renorm(args.resolve(s)?),
            Command::Jellium3d { args, .. } => Plan::Jellium3d(args.resolve(s)?),
            Command::Sample { args, .. } => Plan::Sample(args.resolve(s)?),
            Command::FreeEnergy { args, .. } => Plan::FreeEnergy(args.resolve(s)?),
        })
    }
}

/// Runs one invocation and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let name = cli.command.name();
    match execute(cli.command) {
        Ok(dir) => {
            println!("{name}: wrote {}", dir.join(output::REPORT_FILE).display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\nFor more information, try 'coulomb {name} --help'.");
            }
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<PathBuf, CliError> {
    let name = command.name();
    let common = command.common().clone();
    let mut settings = Settings::load(common.config.as_deref())?;
    let out: Option<String> = settings.lookup("out", common.out.map(|p| p.to_string_lossy().into_owned()))?;
    let dir = out
        .map(PathBuf::from)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("coulomb-out"));
    let threads: usize = settings.lookup("threads", common.threads)?.unwrap_or(1);
    if threads == 0 {
        return Err(CliError::Validation("--threads must be at least 1".into()));
    }
    let plan = command.plan(&mut settings)?;
    let config = settings.finish()?;

    let mut out = output::Output::create(&dir, name, config, commands::convention_ledger()?, threads)?;
    match plan.execute(&mut out) {
        Ok(results) => {
            out.finish(results)?;
            Ok(dir)
        }
        Err(e) => {
            out.fail(&e);
            Err(e)
        }
    }
}
