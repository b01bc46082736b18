use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use uwacomm::harness::{run_experiment, ExperimentConfig, ExperimentKind, HarnessError};

/// Underwater acoustic DS-CDMA experiments.
#[derive(Debug, Parser)]
#[command(name = "uwacomm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also write an SVG plot next to the CSV.
    #[arg(long, global = true)]
    plots: bool,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Monte-Carlo BER against Eb/N0 through the full link.
    BerSweep,
    /// Interleaver variants under burst noise.
    InterleaveCompare,
    /// FDMA, TDMA and CDMA MAC metrics over node counts and loads.
    MacCompare,
    /// Narrowband SNR over distance and frequency.
    SnrMap,
    /// BCH(15, k) generator polynomials in octal.
    CodecTable,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::BerSweep => ExperimentKind::BerSweep,
            Command::InterleaveCompare => ExperimentKind::InterleaverCompare,
            Command::MacCompare => ExperimentKind::MacCompare,
            Command::SnrMap => ExperimentKind::SnrMap,
            Command::CodecTable => ExperimentKind::CodecTable,
        }
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != kind {
                return Err(HarnessError::Config {
                    location: path.display().to_string(),
                    message: format!("experiment is {}, command expects {kind}", cfg.experiment),
                });
            }
            cfg
        }
        None => ExperimentConfig::new(kind),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = run_experiment(&cfg, &cli.out, cli.plots)?;
    if kind == ExperimentKind::CodecTable {
        print!("{}", out.table.body());
    } else {
        println!("{}", out.csv_path.display());
    }
    if let Some(svg) = out.svg_path {
        println!("{}", svg.display());
    }
    Ok(())
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!(
                "error: usage: {}",
                one_line(first.trim_start_matches("error:"))
            );
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), one_line(&e.to_string()));
            ExitCode::from(match e {
                HarnessError::Config { .. } => 2,
                _ => 1,
            })
        }
    }
}
