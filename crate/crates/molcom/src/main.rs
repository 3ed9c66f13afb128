use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use molcom::config::OUTPUT_DIR_ENV;
use molcom::plot::PlotRequest;
use molcom::{plot, selftest, sweep, ExperimentConfig, Result};

/// Error probabilities and lower bounds for CSK, MOSK and MOCSK over the
/// diffusion Poisson channel.
#[derive(Debug, Parser)]
#[command(name = "molcom", version, after_help = format!("Set {OUTPUT_DIR_ENV} to override the output directory of every config."))]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Analytic and Monte Carlo error probability versus power per bit.
    SweepError {
        #[arg(long)]
        config: PathBuf,
        /// Also evaluate the CSK schemes at this next-slot hitting probability.
        #[arg(long = "csk-p2")]
        csk_p2: Option<f64>,
    },
    /// Fano lower bound and binary MOCSK error probability versus peak rate.
    SweepBound {
        #[arg(long)]
        config: PathBuf,
    },
    /// Log-scale SVG plot of CSV columns.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        x: String,
        /// Comma-separated y columns.
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        /// Comma-separated columns naming each series.
        #[arg(long, value_delimiter = ',')]
        group: Option<Vec<String>>,
    },
    /// Statistical checks of the Poisson channel primitives.
    Selftest,
}

fn load(path: &std::path::Path) -> Result<ExperimentConfig> {
    let (cfg, warnings) = ExperimentConfig::load(path)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::SweepError { config, csk_p2 } => {
            let mut cfg = load(&config)?;
            if csk_p2.is_some() {
                cfg.csk_p2_variant = csk_p2;
            }
            cfg.validate()?;
            let rows = sweep::run_error_sweep(&cfg, cfg.mc_symbols)?;
            let path = cfg.error_csv_path();
            sweep::write_file(&path, |buf| sweep::write_error_csv(&rows, buf))?;
            sweep::write_metadata(&path, &cfg)?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::SweepBound { config } => {
            let cfg = load(&config)?;
            let rows = sweep::run_bound_sweep(&cfg)?;
            let path = cfg.bound_csv_path();
            sweep::write_file(&path, |buf| sweep::write_bound_csv(&rows, buf))?;
            sweep::write_metadata(&path, &cfg)?;
            let above = rows
                .iter()
                .filter(|r| r.params.alphabet_size() == 2 && !r.result.vacuous && r.result.pe_lower > r.pe_bmocsk)
                .count();
            if above > 0 {
                eprintln!("warning: {above} non-vacuous |B| = 2 row(s) with the bound above binary MOCSK");
            }
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Plot { input, output, x, y, group } => {
            let data = plot::plot(&PlotRequest { input, output: output.clone(), x, y, group })?;
            println!("{} series -> {}", data.series.len(), output.display());
        }
        Command::Selftest => {
            let checks = selftest::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
            }
            return Ok(checks.iter().all(|c| c.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
