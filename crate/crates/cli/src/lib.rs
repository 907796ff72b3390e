//! Command-line front end: runs policy comparisons, validates templates and
//! checks the solver and scheduler against brute-force references.

pub mod oracle;
pub mod output;
pub mod run;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use holosched_core::PolicyKind;

pub use oracle::{cmd_oracle, run_oracles, OracleConfig, OracleReport};
pub use run::{cmd_run, cmd_validate, execute_run, OutputFormat, RunConfig, RunError};

pub const EXIT_OK: i32 = 0;
/// Domain failure: invalid scenario, solver error or tolerance breach.
pub const EXIT_FAILURE: i32 = 1;
/// Bad arguments, unreadable files or unparsable templates.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "holosched",
    version,
    about = "Latency-aware scheduling for MEC-assisted holographic streaming"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every policy on the template and write results.
    Run {
        /// Scenario template (TOML, or JSON by extension). Defaults to the shipped template.
        #[arg(long)]
        template: Option<PathBuf>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "proposed,jsq,split,local"
        )]
        policies: Vec<PolicyKind>,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Overrides the template's rng_seed.
        #[arg(long, env = "HOLOSCHED_SEED")]
        seed: Option<u64>,
        #[arg(long, value_delimiter = ',', default_value = "csv,md,json")]
        formats: Vec<OutputFormat>,
    },
    /// Check a template and print every violation.
    Validate { template: PathBuf },
    /// Compare the solver and scheduler with brute-force references.
    Oracle {
        /// Number of scheduler instances.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Grid resolution for fraction search.
        #[arg(long, default_value_t = 0.02)]
        grid: f64,
        /// Number of random linear programs.
        #[arg(long, default_value_t = 50)]
        lp_seeds: u64,
        /// Allowed relative deviation from the grid optimum.
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
    },
}

pub fn execute(cli: Cli) -> i32 {
    let mut stdout = std::io::stdout().lock();
    let mut stderr = std::io::stderr().lock();
    match cli.command {
        Command::Run {
            template,
            policies,
            out,
            seed,
            formats,
        } => {
            let config = RunConfig {
                template,
                policies,
                out_dir: out,
                formats,
                seed,
            };
            cmd_run(&config, &mut stdout, &mut stderr)
        }
        Command::Validate { template } => cmd_validate(&template, &mut stdout, &mut stderr),
        Command::Oracle {
            seeds,
            grid,
            lp_seeds,
            tolerance,
        } => {
            let config = OracleConfig {
                seeds,
                grid,
                lp_seeds,
                tolerance,
                ..OracleConfig::default()
            };
            cmd_oracle(&config, &mut stdout, &mut stderr)
        }
    }
}
