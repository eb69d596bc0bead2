use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ergodic_eki::runner::{
    compute_statistics, read_trajectory_csv, run_experiment, simulate_truth, ExperimentConfig, GammaStructure,
    RunOptions, RunnerError, StatisticsConfig,
};

#[derive(Parser)]
#[command(name = "ergodic-eki", version, about = "Fit SDE models to ergodic statistics with ensemble Kalman inversion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a whole experiment and write its result bundle.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Generate (or ingest) the data of an experiment only.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Statistics and batch-means covariance of a trajectory CSV.
    Stats {
        /// CSV with header `t,x1,...`.
        csv: PathBuf,
        /// TOML file in the format of an experiment's `[statistics]` table.
        spec: PathBuf,
        /// Number of batches for the covariance estimate.
        #[arg(long, default_value_t = 20)]
        batches: usize,
        /// Write the observation JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Override the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Apply the config's short `[smoke]` settings.
    #[arg(long)]
    smoke: bool,
    /// Use the configured data file instead of the synthetic stand-in.
    #[arg(long)]
    with_data: bool,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions {
            seed: self.seed,
            out: self.out.clone(),
            smoke: self.smoke,
            with_data: self.with_data,
        }
    }
}

fn output_dir(cfg: &ExperimentConfig, common: &Common) -> PathBuf {
    common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| Path::new("results").join(&cfg.name))
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, common } => {
            let cfg = ExperimentConfig::load(&config)?;
            let bundle = run_experiment(&cfg, &common.options())?;
            let s = &bundle.summary;
            println!("{}: {} generations, misfit {:.4e} -> {:.4e}", s.name, s.generations, s.initial_misfit, s.final_misfit);
            for (name, v) in s.parameter_names.iter().zip(&s.final_mean) {
                println!("  {name} = {v:.6}");
            }
            for (c, tv) in s.tv_components.iter().zip(&s.tv) {
                println!("  TV(component {c}) = {tv:.4}");
            }
            println!("  TV(pooled) = {:.4}", s.tv_pooled);
            println!("results in {}", bundle.dir.display());
        }
        Command::Simulate { config, common } => {
            let cfg = ExperimentConfig::load(&config)?;
            let truth = simulate_truth(&cfg, &common.options())?;
            let dir = output_dir(&cfg, &common);
            std::fs::create_dir_all(&dir).map_err(RunnerError::from)?;
            let file = std::fs::File::create(dir.join("data.csv")).map_err(RunnerError::from)?;
            truth
                .trajectory
                .write_csv(std::io::BufWriter::new(file), 1)
                .map_err(RunnerError::from)?;
            truth.data.write_json(&dir.join("observation.json")).map_err(RunnerError::from)?;
            println!("{} samples, {} statistics written to {}", truth.trajectory.len(), truth.data.len(), dir.display());
        }
        Command::Stats { csv, spec, batches, out } => {
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| RunnerError::Config(format!("{}: {e}", spec.display())))?;
            let stats: StatisticsConfig = toml::from_str(&text).map_err(|e| RunnerError::Config(e.to_string()))?;
            let spec = stats.to_spec()?;
            let traj = read_trajectory_csv(&csv)?;
            let data = compute_statistics(&traj, &spec, batches, GammaStructure::Full, None)?;
            match out {
                Some(path) => data
                    .write_json(&path)
                    .map_err(RunnerError::from)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => println!("{}", data.to_json()),
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
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<RunnerError>().map_or(1, RunnerError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
