//! Reproducible experiment driver: train minima, connect pairs with
//! AutoNEB, explore sets of minima and export loss profiles.

pub mod commands;
pub mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Experiment;

#[derive(Debug, Parser)]
#[command(name = "autoneb", version, about = "Minimum-energy paths and saddle atlases for loss landscapes")]
pub struct Cli {
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; defaults to the config's output_dir, then `out`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for per-pivot evaluation; defaults to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train minima from seeded initialisations.
    Train {
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
    /// Connect two minima files with AutoNEB.
    Connect { min_a: PathBuf, min_b: PathBuf },
    /// Build the saddle graph over a directory of minima files.
    Explore { minima_dir: PathBuf },
    /// Dense loss profiles of a stored chain and of its straight segment.
    EvalPath {
        chain: PathBuf,
        #[arg(long, default_value_t = 9)]
        dense: usize,
    },
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

/// Exit code for a failed run: 2 when a core numerical failure is in the
/// error chain, 1 otherwise.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<autoneb_core::Error>())
        .any(|e| e.is_numerical());
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let Some(config_path) = &cli.config else {
        anyhow::bail!("--config is required");
    };
    let exp = Experiment::load(config_path, cli.seed)?;
    let out = cli.out.clone().or_else(|| exp.config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            anyhow::bail!("--workers must be at least 1");
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Train { count } => {
            let manifest = commands::cmd_train(&exp, *count, &out)?;
            for m in &manifest.minima {
                println!("{}  loss {:.6e}", m.file, m.loss);
            }
            Ok(())
        }
        Command::Connect { min_a, min_b } => {
            let r = commands::cmd_connect(&exp, min_a, min_b, &out)?;
            println!(
                "saddle_loss {:.6e}  min_loss_a {:.6e}  min_loss_b {:.6e}  path_length_ratio {:.4}  pivots {}",
                r.saddle_loss, r.min_loss_a, r.min_loss_b, r.path_length_ratio, r.pivots
            );
            Ok(())
        }
        Command::Explore { minima_dir } => {
            let (graph, summary) = commands::cmd_explore(&exp, minima_dir, &out)?;
            print!("{}", commands::mst_table(&graph));
            println!("runs {}  stop {:?}", summary.runs, summary.stop);
            Ok(())
        }
        Command::EvalPath { chain, dense } => {
            let (chain_max, straight_max) = commands::cmd_eval_path(&exp, chain, *dense, &out)?;
            println!("chain max {chain_max:.6e}  straight max {straight_max:.6e}");
            Ok(())
        }
    })
}

/// Parses arguments, runs, and maps the outcome to the documented exit
/// codes.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
