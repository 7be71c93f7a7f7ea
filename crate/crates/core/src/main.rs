//! `rsma-parga` command-line driver.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rsma_parga::config::{load_scenario, save_scenario, Scenario};
use rsma_parga::experiments::{
    apply_seed_override, compare_oracle_scenario, default_snr_grid, parse_methods, parse_snr_list,
    parse_theta_list, run_sweep, validate_scenario, SweepSpec,
};
use rsma_parga::{channel::parse_angle, Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "rsma-parga",
    version,
    about = "RSMA power allocation by genetic algorithm"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep SNR and theta1 across methods and write a CSV
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// `start:stop:step` in dB (inclusive) or a comma-separated list
        #[arg(long)]
        snr: Option<String>,
        /// Comma-separated angles, e.g. `pi/9,8pi/9`; defaults to the scenario's theta1
        #[arg(long)]
        theta1: Option<String>,
        /// Fixed theta2 for every point (default: 2 * theta1)
        #[arg(long)]
        theta2: Option<String>,
        /// Any of parga, fp_rsma, sdma, noma, oracle
        #[arg(long, default_value = "parga,fp_rsma,sdma,noma")]
        methods: String,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        /// Grid resolution of the oracle method
        #[arg(long, default_value_t = 20)]
        grid_steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check that a scenario parses and can be zero-forced
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Compare PARGA with the exhaustive grid optimum at one SNR
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        #[arg(long, default_value_t = 20)]
        grid_steps: usize,
    },
    /// Write the default three-user scenario file
    Init {
        #[arg(long, default_value = "pi/9")]
        theta1: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<Scenario> {
    let mut scenario = load_scenario(path)?;
    apply_seed_override(&mut scenario, std::env::var("RSMA_SEED").ok().as_deref())?;
    Ok(scenario)
}

fn angle(text: &str) -> Result<f64> {
    parse_angle(text).ok_or_else(|| Error::Config {
        line: None,
        message: format!("invalid angle `{text}`"),
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Sweep {
            scenario,
            snr,
            theta1,
            theta2,
            methods,
            repeats,
            grid_steps,
            out,
        } => {
            let s = load(&scenario)?;
            let spec = SweepSpec {
                snr_db_list: snr
                    .as_deref()
                    .map(parse_snr_list)
                    .transpose()?
                    .unwrap_or_else(default_snr_grid),
                methods: parse_methods(&methods)?,
                theta1_list: match theta1 {
                    Some(t) => parse_theta_list(&t)?,
                    None => vec![s.params.theta1],
                },
                repeats,
                theta2: theta2.as_deref().map(angle).transpose()?,
                grid_steps,
            };
            let summary = run_sweep(&s, &spec, &out)?;
            print!("{summary}");
            eprintln!("wrote {}", out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scenario } => {
            let report = validate_scenario(&load(&scenario)?);
            print!("{report}");
            Ok(if report.is_clean() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Oracle {
            scenario,
            snr_db,
            grid_steps,
        } => {
            print!(
                "{}",
                compare_oracle_scenario(&load(&scenario)?, snr_db, grid_steps)?
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Init { theta1, out } => {
            save_scenario(&out, &Scenario::three_user(angle(&theta1)?)?)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
