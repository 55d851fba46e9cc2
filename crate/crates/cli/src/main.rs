//! `star-nls`: stationary states, spectra and dynamics of the NLS equation on
//! star graphs from JSON experiment configurations.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 failed assertion
//! (`--assert-theorem`, failing `verify` checks), 3 numerical failure.

mod commands;
mod config;
mod error;

use clap::{Args, Parser, Subcommand};
use config::{ExperimentConfig, Overrides};
use error::CliError;
use star_nls::graph::StarGraph;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const DEFAULT_OUT: &str = "star-nls-out";

#[derive(Parser)]
#[command(
    name = "star-nls",
    version,
    about = "Shifted NLS states on star graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Directory for reports (created if missing).
    #[arg(long, value_name = "DIR", default_value = DEFAULT_OUT)]
    out: PathBuf,
    /// Seed of the random perturbations and eigensolver start vectors.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Overrides the shift `a`.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    /// Overrides the grid spacing.
    #[arg(long)]
    h: Option<f64>,
    /// Overrides the time step.
    #[arg(long)]
    tau: Option<f64>,
    /// Overrides the run length.
    #[arg(long)]
    t_end: Option<f64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig, CliError> {
        let o = Overrides {
            seed: self.seed,
            a: self.a,
            h: self.h,
            tau: self.tau,
            t_end: self.t_end,
        };
        ExperimentConfig::load(&self.config, &o)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Point spectrum of L+ by shooting and by the discrete operator, with the
    /// linearized stability spectrum.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Exit with code 2 unless both Morse indices match the prediction.
        #[arg(long)]
        assert_theorem: bool,
    },
    /// Point spectrum of L+ by shooting only.
    Shoot {
        #[command(flatten)]
        common: Common,
    },
    /// Time evolution: orbit, transit or growth run (`evolve.kind`).
    Evolve {
        #[command(flatten)]
        common: Common,
    },
    /// Admissible sign patterns and the family count.
    Families {
        /// Graph from a configuration file.
        #[arg(long, value_name = "PATH", conflicts_with = "edges")]
        config: Option<PathBuf>,
        /// Unit-weight graph with this many edges.
        #[arg(long, value_name = "N")]
        edges: Option<usize>,
        #[arg(long, value_name = "DIR", default_value = DEFAULT_OUT)]
        out: PathBuf,
    },
    /// Runs the acceptance checks and prints one PASS/FAIL line per check.
    Verify {
        /// Check id (e.g. A5) or group: graph, shooting, spectrum, dynamics, families.
        #[arg(long, value_name = "NAME")]
        filter: Option<String>,
        #[arg(long, value_name = "INT", default_value_t = 7)]
        seed: u64,
        /// Also write verify.json here.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

fn families_graph(config: Option<&Path>, edges: Option<usize>) -> Result<StarGraph, CliError> {
    match (config, edges) {
        (Some(path), _) => Ok(ExperimentConfig::load(path, &Overrides::default())?.graph),
        (None, Some(n)) => Ok(StarGraph::new_unconstrained(
            n,
            (n / 2).max(1),
            &vec![1.0; n],
            1.0,
        )?),
        (None, None) => Err(CliError::Config(
            "families needs --config or --edges".into(),
        )),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum {
            common,
            assert_theorem,
        } => commands::spectrum(&common.load()?, &common.out, assert_theorem),
        Command::Shoot { common } => commands::shoot(&common.load()?, &common.out),
        Command::Evolve { common } => commands::evolve(&common.load()?, &common.out),
        Command::Families { config, edges, out } => {
            commands::families(&families_graph(config.as_deref(), edges)?, &out)
        }
        Command::Verify { filter, seed, out } => {
            commands::verify(filter.as_deref(), seed, out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            // clap's own usage code is 2, which is reserved for assertions here
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
