use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ekigl::harness::{format_table, read_metrics, run_experiment, summarize, ExperimentConfig};
use ekigl::models::list_models;

#[derive(Parser)]
#[command(name = "ekigl", version, about = "Ensemble Kalman inversion and ABC experiments")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (algorithm, N, seed) cell of an experiment config.
    Run {
        config: PathBuf,
        /// Overrides `root_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `output`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes per-iteration ensembles.
        #[arg(long)]
        snapshots: bool,
    },
    /// List the available models.
    ListModels,
    /// Check a config without simulating.
    Validate { config: PathBuf },
    /// Median and quartiles of RMSE and simulation count per (algorithm, N).
    Summarize { metrics: PathBuf },
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            snapshots,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(s) = seed {
                cfg.root_seed = s;
            }
            if snapshots {
                cfg.snapshots = true;
            }
            let name = config.file_stem().and_then(|s| s.to_str()).unwrap_or("experiment");
            let dir = out.unwrap_or_else(|| cfg.output_dir(name));
            let rows = run_experiment(&cfg, &dir)?;
            let failed = rows.iter().filter(|r| r.failed()).count();
            println!("{} runs ({} failed) -> {}", rows.len(), failed, dir.join("metrics.csv").display());
            for r in rows.iter().filter(|r| r.failed()) {
                eprintln!("{} N={} seed={}: {}", r.algorithm, r.n, r.seed, r.termination);
            }
        }
        Command::ListModels => {
            for (name, about) in list_models() {
                println!("{name:<10} {about}");
            }
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let model = cfg.validate()?;
            println!(
                "ok: model {} (d_x = {}, d_y = {}), {} algorithm(s) x {} size(s) x {} seed(s)",
                model.name(),
                model.dim_x(),
                model.dim_y(),
                cfg.algorithms().len(),
                cfg.sizes().len(),
                cfg.seeds.len()
            );
        }
        Command::Summarize { metrics } => {
            let rows = read_metrics(File::open(&metrics)?)?;
            print!("{}", format_table(&summarize(&rows)));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
