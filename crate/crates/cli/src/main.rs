use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use polisim::batch::{parse_sweep, run_jobs, seed_jobs, sweep_jobs, write_outputs};
use polisim::stats::RunRecord;
use polisim::synthpop::{generate_synthetic_inputs, write_inputs};
use polisim::{Config, ConfigError, PolicyKind};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "polisim",
    version,
    about = "Agent-based metropolitan economy simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario for several seeds.
    Run(RunArgs),
    /// Sweep one parameter (NAME:START:END:INTERVALS) or all policies (POLICIES).
    Sensitivity {
        spec: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Write synthetic input tables as CSV files.
    GenData {
        #[arg(long, env = "POLISIM_OUT", default_value = "data")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        regions: usize,
        #[arg(long, default_value_t = 3)]
        municipalities: usize,
        /// Real population in thousands.
        #[arg(long, default_value_t = 1000.0)]
        scale: f64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of runs (seeds) per scenario or sweep point.
    #[arg(short = 'n', long = "runs", default_value_t = 1)]
    runs: usize,
    /// Worker threads.
    #[arg(short = 'c', long = "cpus", default_value_t = 1)]
    cpus: usize,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// baseline, acquisition, voucher or aid; overrides the config.
    #[arg(long)]
    scenario: Option<String>,
    /// Horizon in months; overrides the config.
    #[arg(long)]
    months: Option<u32>,
    #[arg(long, env = "POLISIM_OUT", default_value = "output")]
    out: PathBuf,
    /// Also write one SVG plot per indicator.
    #[arg(long)]
    svg: bool,
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn load_config(args: &RunArgs) -> Result<Config, Failure> {
    let mut config = match &args.config {
        Some(path) => Config::from_path(path).map_err(config_err)?,
        None => Config::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(name) = &args.scenario {
        config.scenario = PolicyKind::parse(name).ok_or_else(|| {
            config_err(anyhow::anyhow!(
                "unknown scenario `{name}` (baseline, acquisition, voucher, aid)"
            ))
        })?;
    }
    if let Some(m) = args.months {
        config.horizon_months = m;
    }
    if args.runs == 0 {
        return Err(config_err(ConfigError::OutOfRange {
            name: "runs",
            value: 0.0,
            reason: "need at least one run",
        }));
    }
    config.validate().map_err(config_err)?;
    Ok(config)
}

fn finish(
    args: &RunArgs,
    command: &str,
    config: &Config,
    records: &[RunRecord],
) -> Result<(), Failure> {
    let manifest = write_outputs(&args.out, command, config, records, args.svg)
        .with_context(|| format!("writing results to {}", args.out.display()))?;
    let failed: Vec<&RunRecord> = records.iter().filter(|r| r.error.is_some()).collect();
    println!(
        "{} runs, {} failed; manifest at {}",
        records.len(),
        failed.len(),
        manifest.display()
    );
    for r in &failed {
        eprintln!(
            "run {} failed: {}",
            r.run_id,
            r.error.as_deref().unwrap_or_default()
        );
    }
    if failed.iter().any(|r| !r.config_error) {
        return Err(Failure::Runtime(anyhow::anyhow!(
            "{} runs failed",
            failed.len()
        )));
    }
    if !failed.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!(
            "{} runs could not be set up",
            failed.len()
        )));
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let config = load_config(&args)?;
            let jobs = seed_jobs(&config, args.runs);
            let records = run_jobs(&config, &jobs, args.cpus)?;
            finish(&args, "run", &config, &records)
        }
        Command::Sensitivity { spec, run: args } => {
            let config = load_config(&args)?;
            let sweep = parse_sweep(&spec).map_err(config_err)?;
            let jobs = sweep_jobs(&config, &sweep, args.runs).map_err(config_err)?;
            let records = run_jobs(&config, &jobs, args.cpus)?;
            finish(&args, &format!("sensitivity {spec}"), &config, &records)
        }
        Command::GenData {
            out,
            seed,
            regions,
            municipalities,
            scale,
        } => {
            let (specs, tables) = generate_synthetic_inputs(seed, regions, municipalities, scale)
                .map_err(config_err)?;
            let files = write_inputs(&out, &specs, &tables)?;
            println!("wrote {} files to {}", files.len(), out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
