//! Convergence-study CLI.
//!
//! Reads an optional TOML manifest, applies flag overrides, runs the
//! level sweep and prints the verdict table (`summary.csv`) to stdout.
//! Exit codes: 0 when every combination and norm passes, 1 when any
//! fails or aborts, 2 for configuration or I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fosls::study::{parse_degree_list, parse_family, run_study, StudyConfig};

#[derive(Parser)]
#[command(
    name = "fosls-study",
    version,
    about = "Convergence studies for the least-squares disk solver"
)]
struct Cli {
    /// TOML manifest; the flags below override its entries.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Case name: smooth | indicator | dirichlet-smoke.
    #[arg(long)]
    case: Option<String>,
    /// Reaction coefficient.
    #[arg(long)]
    gamma: Option<f64>,
    /// Vector family: RT | BDM.
    #[arg(long)]
    family: Option<String>,
    /// Scalar degrees: comma list or inclusive range (2 | 1,3 | 1-3).
    #[arg(long)]
    ps: Option<String>,
    /// Vector degrees, same syntax as --ps.
    #[arg(long)]
    pv: Option<String>,
    /// Finest mesh level; the sweep runs levels 1..=levels.
    #[arg(long)]
    levels: Option<usize>,
    /// Fan triangles of the coarsest mesh.
    #[arg(long)]
    n_fan: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Also write expected-rates.csv with the predicted-rate table.
    #[arg(long)]
    expected_rates: bool,
    /// Ignore the desk-scale DOF guardrail.
    #[arg(long)]
    force: bool,
}

fn build_config(cli: &Cli) -> fosls::Result<StudyConfig> {
    let mut config = match &cli.config {
        Some(path) => StudyConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => StudyConfig::default(),
    };
    if let Some(v) = &cli.case {
        config.case = v.clone();
    }
    if let Some(v) = cli.gamma {
        config.gamma = v;
    }
    if let Some(v) = &cli.family {
        config.family = parse_family(v)?;
    }
    if let Some(v) = &cli.ps {
        config.ps = parse_degree_list(v)?;
    }
    if let Some(v) = &cli.pv {
        config.pv = parse_degree_list(v)?;
    }
    if let Some(v) = cli.levels {
        config.levels = v;
    }
    if let Some(v) = cli.n_fan {
        config.n_fan = v;
    }
    if let Some(v) = &cli.out {
        config.out = v.clone();
    }
    if cli.expected_rates {
        config.expected_rates = true;
    }
    if cli.force {
        config.force = true;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    match run_study(&config) {
        Ok(report) => {
            print!("{}", report.summary);
            for combo in &report.combos {
                if let Some(reason) = &combo.failure {
                    eprintln!("ps={} pv={} aborted: {reason}", combo.p_s, combo.p_v);
                }
            }
            if report.all_pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
    }
}
