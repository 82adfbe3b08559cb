//! `quasidet` command line: scenario files in, tables and a manifest out.
//!
//! Exit codes: 0 success, 1 input or parameter error, 2 an identity check
//! failed at the configured tolerance.

mod commands;
mod report;
mod scenario_file;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use commands::{
    cmd_analyze, cmd_demo_pauli, cmd_simulate, cmd_tomography, paradox_summary, render_table,
    summary, Settings, TomographyMode, TomographySource,
};
pub use report::{format_float, Cell, Check, Format, ReportBundle, Table};
pub use scenario_file::{
    load_scenario, parse_scenario, BasisSpec, ObservableSpec, ScenarioFile, StateSpec, PAULI_DEMO,
};

use crate::exec::Execution;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_IDENTITY: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "quasidet",
    version,
    about = "Weak values, transient densities and conditional uncertainties"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact weak values, quasi-probabilities, uncertainty budget and identity checks.
    Analyze {
        /// Scenario file, or `pauli_demo`.
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo von Neumann pointer readings and zero-coupling extrapolation.
    Simulate {
        scenario: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Linear-inversion reconstruction of the transient operators.
    Tomography {
        scenario: PathBuf,
        /// Weak values from the exact formula or from the simulator.
        #[arg(long, value_enum, default_value = "exact")]
        source: TomographySource,
        /// Defaults to `complex` for exact input and `hermitian-part` for simulated input.
        #[arg(long, value_enum)]
        mode: Option<TomographyMode>,
        /// Reconstruct only this outcome of the final basis.
        #[arg(long = "final")]
        final_index: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Built-in Pauli example: analyze plus simulate, with the paradox summary.
    Demo {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory for tables and manifest.json.
    #[arg(long, default_value = "quasidet-out")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shots: Option<u64>,
    /// Comma-separated couplings for extrapolation, e.g. `0.05,0.1,0.2`.
    #[arg(long, value_delimiter = ',')]
    pub couplings: Option<Vec<f64>>,
    #[arg(long, default_value_t = crate::uncertainty::DEFAULT_IDENTITY_TOL)]
    pub tol_identity: f64,
    /// Orthonormality tolerance for explicit final bases.
    #[arg(long, default_value_t = crate::states::DEFAULT_BASIS_TOL)]
    pub tol_basis: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Run the Monte Carlo on one thread (output is identical).
    #[arg(long)]
    pub sequential: bool,
}

impl Common {
    fn settings(&self) -> Settings {
        Settings {
            tol_identity: self.tol_identity,
            tol_basis: self.tol_basis,
            seed: self.seed,
            shots: self.shots,
            couplings: self.couplings.clone(),
            exec: if self.sequential {
                Execution::Sequential
            } else {
                Execution::Parallel
            },
        }
    }
}

fn scenario_name(path: &Path) -> String {
    path.to_string_lossy().into_owned()
}

fn execute(cli: &Cli) -> anyhow::Result<(ReportBundle, &Common)> {
    Ok(match &cli.command {
        Command::Analyze { scenario, common } => {
            let s = load_scenario(scenario, common.tol_basis)?;
            (
                cmd_analyze(&s, &scenario_name(scenario), &common.settings())?,
                common,
            )
        }
        Command::Simulate { scenario, common } => {
            let s = load_scenario(scenario, common.tol_basis)?;
            (
                cmd_simulate(&s, &scenario_name(scenario), &common.settings())?,
                common,
            )
        }
        Command::Tomography {
            scenario,
            source,
            mode,
            final_index,
            common,
        } => {
            let s = load_scenario(scenario, common.tol_basis)?;
            let b = cmd_tomography(
                &s,
                &scenario_name(scenario),
                &common.settings(),
                *source,
                *mode,
                *final_index,
            )?;
            (b, common)
        }
        Command::Demo { common } => (cmd_demo_pauli(&common.settings())?, common),
    })
}

/// Parses arguments, runs the command, writes outputs and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let (bundle, common) = match execute(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_INPUT;
        }
    };
    if let Err(e) = bundle.write(&common.out, common.format) {
        eprintln!("error: {e:#}");
        return EXIT_INPUT;
    }
    print!("{}", summary(&bundle));
    if matches!(cli.command, Command::Demo { .. }) {
        print!("{}", paradox_summary(&bundle));
    }
    println!("outputs written to {}", common.out.display());
    bundle.exit_code()
}
