use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use anifd::config::{describe_keys, env_name, parse_config_with_overrides, RunConfig, KEYS};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "anifd", version, about = "Anisotropic fast diffusion: exponents, barriers, evolution and checks")]
struct Cli {
    /// INI-style configuration file; every key can also be set by its environment variable.
    #[arg(long, global = true, env = "ANIFD_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "ANIFD_OUT", default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "ANIFD_THREADS")]
    threads: Option<usize>,
    /// Seed for randomized data generators; overrides `run.seed`.
    #[arg(long, global = true, env = "ANIFD_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print and save the exponent table of the configured model.
    Exponents,
    /// Barrier parameters, a residual-sign sample and cross-sections.
    Barriers {
        /// Relative position inside the admissibility windows.
        #[arg(long, default_value_t = anifd::barriers::DEFAULT_SLACK)]
        slack: f64,
        /// Sample points per barrier.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Evolve the configured initial data in physical variables.
    Evolve,
    /// Relax the configured data to a self-similar profile in rescaled variables.
    Relax,
    /// Run a named check suite, optionally against a stored run manifest.
    Verify {
        /// exponents | barriers | evolve | relax | attraction | all
        #[arg(long, default_value = "all")]
        suite: String,
        /// Manifest of a previous run: its config is reused and its outputs must be reproduced.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Distance of the configured data to the self-similar profile at t = 1, 2, 4, 8, 16.
    VerifyAttraction,
    /// Marching-squares level lines of a 2-D field CSV.
    ExportLevels {
        /// Field CSV (default: profile.csv in the output directory).
        #[arg(long)]
        field: Option<PathBuf>,
        /// Comma-separated levels; overrides `output.levels`.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<f64>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut overrides: Vec<(String, String)> =
        KEYS.iter().filter_map(|(key, _, _)| std::env::var(env_name(key)).ok().map(|v| (key.to_string(), v))).collect();
    if let Some(s) = cli.seed {
        overrides.push(("run.seed".into(), s.to_string()));
    }
    let cfg = parse_config_with_overrides(&text, &overrides).with_context(|| match &cli.config {
        Some(p) => format!("in {}", p.display()),
        None => "in the configuration".into(),
    })?;
    Ok(cfg)
}

fn real_main() -> Result<bool> {
    let help = format!("Configuration keys (file value, or environment variable ANIFD_<SECTION>_<KEY>):\n{}", describe_keys());
    let matches = Cli::command().after_long_help(help).get_matches();
    let cli = Cli::from_arg_matches(&matches)?;
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("building the thread pool")?;
    }
    let cfg = load_config(&cli)?;
    let out = &cli.out;
    match &cli.command {
        Command::Exponents => commands::exponents(&cfg, out).map(|_| true),
        Command::Barriers { slack, samples } => commands::barriers(&cfg, out, *slack, *samples).map(|m| commands::passed(&m)),
        Command::Evolve => commands::evolve(&cfg, out).map(|m| commands::passed(&m)),
        Command::Relax => commands::relax(&cfg, out).map(|m| commands::passed(&m)),
        Command::VerifyAttraction => commands::verify_attraction(&cfg, out).map(|m| commands::passed(&m)),
        Command::Verify { suite, manifest } => commands::verify(&cfg, out, suite, manifest.as_deref()),
        Command::ExportLevels { field, levels } => {
            let levels = if levels.is_empty() { cfg.levels.clone() } else { levels.clone() };
            commands::export_levels(out, field.as_deref(), &levels).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
