use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use greenroof::config::PipelineConfig;
use greenroof::priority::Scheme;
use greenroof::synth::{self, SyntheticCitySpec};
use greenroof::{pipeline, Error, ErrorKind};

#[derive(Parser)]
#[command(
    name = "greenprior",
    version,
    about = "Green-roof potential, priority and benefit pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Pipeline configuration (key = value file).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Weighting scheme: equal, entropy, cv or critic.
    #[arg(long)]
    scheme: Option<String>,
    /// DSM cell size in metres.
    #[arg(long)]
    cell: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic city and a configuration pointing at it.
    Synth {
        /// Path of the configuration to write; the dataset goes next to it.
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 60)]
        buildings: usize,
    },
    /// Roof extraction and potential decision.
    Extract(Common),
    /// Indicator surfaces and per-building indicators.
    Indicators(Common),
    /// Priorities under every weighting scheme.
    Prioritize(Common),
    /// Carbon, energy and economic benefits.
    Benefits(Common),
    /// Collect stage summaries into report.md.
    Report(Common),
    /// Every analysis stage in order.
    Run(Common),
}

fn load(c: &Common) -> Result<PipelineConfig, Error> {
    let mut cfg = PipelineConfig::load(&c.config)?;
    if let Some(out) = &c.out {
        cfg.out = out.clone();
    }
    if let Some(s) = &c.scheme {
        cfg.scheme = Scheme::parse(s).ok_or_else(|| Error::Config(format!("unknown weighting scheme {s:?}")))?;
    }
    if let Some(cell) = c.cell {
        if !(cell.is_finite() && cell > 0.0) {
            return Err(Error::Config(format!("--cell must be positive, got {cell}")));
        }
        cfg.dsm_cell = cell;
    }
    Ok(cfg)
}

fn synth_cmd(config: &PathBuf, seed: u64, buildings: usize) -> Result<Vec<String>, Error> {
    let dir = match config.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let spec = SyntheticCitySpec {
        seed,
        buildings,
        ..Default::default()
    };
    let city = synth::generate(&spec);
    let written = synth::write_dataset(&city, &dir)?;
    if written.file_name() != config.file_name() {
        std::fs::rename(&written, config).map_err(|e| Error::Io {
            path: config.clone(),
            source: e,
        })?;
    }
    Ok(vec![format!(
        "synthetic city: {} buildings, {} points, seed {seed}",
        city.buildings.len(),
        city.points.len()
    )])
}

fn run(cli: Cli) -> Result<Vec<String>, Error> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            buildings,
        } => synth_cmd(&config, seed, buildings),
        Command::Extract(c) => Ok(vec![pipeline::run_extract(&load(&c)?)?]),
        Command::Indicators(c) => Ok(vec![pipeline::run_indicators(&load(&c)?)?]),
        Command::Prioritize(c) => Ok(vec![pipeline::run_prioritize(&load(&c)?)?]),
        Command::Benefits(c) => Ok(vec![pipeline::run_benefits(&load(&c)?)?]),
        Command::Report(c) => Ok(vec![pipeline::run_report(&load(&c)?)?]),
        Command::Run(c) => pipeline::run_all(&load(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage problems are validation errors, help and version are not
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Validation => 1,
                ErrorKind::Io => 2,
                ErrorKind::Computation => 3,
            })
        }
    }
}
