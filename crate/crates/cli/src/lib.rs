//! `bora` command line: run experiments, validate configs, render GP slices.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use bora_core::harness::{self, aggregate, render_slice, ExperimentConfig};
use bora_core::{Error, PolicyId};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

/// Exit code for invalid configurations and usage errors.
pub const EXIT_CONFIG: i32 = 1;
/// Exit code for failures while running.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "bora", version, about = "Bayesian optimization for budgeted resource allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write trace.csv, summary.csv and a chart.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed, overriding `master_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Plot a BORA surrogate along the budget segment of a two-arm config.
    GpSlice {
        #[arg(long)]
        config: PathBuf,
        /// One or more BORA policies, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        policy: Vec<PolicyId>,
        /// Number of observed steps before the slice.
        #[arg(long)]
        t: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Grid points along the segment.
        #[arg(long, default_value_t = 341)]
        points: usize,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn exit_code(error: &Error) -> i32 {
    match error {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Parses `args` (program name first) and executes the command.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> bora_core::Result<()> {
    match command {
        Command::Validate { config } => {
            let c = ExperimentConfig::load(&config)?;
            println!(
                "{}: ok ({} policies, m = {}, T = {}, {} runs)",
                config.display(),
                c.policies.len(),
                c.m,
                c.horizon,
                c.runs
            );
            Ok(())
        }
        Command::Run { config, out, seed } => {
            let mut c = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                c.master_seed = seed;
            }
            let out_dir = out.unwrap_or_else(|| c.out_dir.clone());
            let (traces, paths) = harness::run_and_report(&c, &out_dir)?;
            for s in aggregate(&traces)? {
                let sd = s.sd_cumulative.last().copied().unwrap_or(0.0);
                println!("{:<7} final cumulative reward {:.3} (sd {:.3})", s.policy.as_str(), s.final_mean(), sd);
            }
            for path in [&paths.trace, &paths.summary, &paths.chart] {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::GpSlice { config, policy, t, out, points } => {
            let c = ExperimentConfig::load(&config)?;
            let out_dir = out.unwrap_or_else(|| c.out_dir.clone());
            for p in policy {
                let slice = harness::gp_slice(&c, p, t, points)?;
                let path = write_slice(&out_dir, p, t, &render_slice(&slice)?)?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
    }
}

fn write_slice(out_dir: &Path, policy: PolicyId, t: usize, svg: &str) -> bora_core::Result<PathBuf> {
    fs::create_dir_all(out_dir)?;
    let path = out_dir.join(format!("gp_slice_{policy}_t{t}.svg"));
    fs::write(&path, svg)?;
    Ok(path)
}
