use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use tumorsim::config::load_config;
use tumorsim::limit::run_limit_study;
use tumorsim::mms;
use tumorsim::simulate::{check_bounds, run, Mode};

#[derive(Parser)]
#[command(name = "tumorsim", version, about = "Diffuse-interface tumor growth simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write diagnostics to the output directory.
    Run { config: PathBuf },
    /// Manufactured-solution convergence suite for the elliptic solver.
    Mms,
    /// Vanishing-interface sweep over the configured eps_list.
    Limit { config: PathBuf },
    /// Parse and validate a configuration.
    Check { config: PathBuf },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Check { config } => {
            let cfg = load_config(&config)?;
            cfg.initial_fields()?;
            println!("ok: {}", config.display());
        }
        Command::Run { config } => {
            let mut cfg = load_config(&config)?;
            if cfg.run.output_dir.is_none() {
                cfg.run.output_dir = Some(PathBuf::from("out"));
            }
            let out = run(&cfg)?;
            let dir = cfg.run.output_dir.as_ref().unwrap();
            let rep = check_bounds(&out.final_state, cfg.time.dt, 1e-8);
            for f in rep.failures() {
                eprintln!("warning: {f}");
            }
            println!(
                "{} steps to t = {}; diagnostics in {}",
                out.records.len(),
                out.final_state.t,
                dir.join("diagnostics.csv").display()
            );
        }
        Command::Mms => {
            let cases = mms::run_suite(&[16, 32, 64])?;
            print!("{}", mms::format_table(&cases));
            let bad: Vec<_> = cases
                .iter()
                .filter(|c| c.orders().iter().any(|o| !(1.8..=2.2).contains(o)))
                .map(|c| c.name)
                .collect();
            if !bad.is_empty() {
                bail!("observed order outside [1.8, 2.2] for {}", bad.join(", "));
            }
        }
        Command::Limit { config } => {
            let mut cfg = load_config(&config)?;
            cfg.run.mode = Mode::Limit;
            let eps = cfg
                .limit
                .as_ref()
                .map(|l| l.eps_list.clone())
                .context("config has no [limit] section with eps_list")?;
            let report = run_limit_study(&eps, &cfg)?;
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            print!("{}", String::from_utf8_lossy(&buf));
            if let Some(dir) = &cfg.run.output_dir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("limit.csv"), &buf)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
