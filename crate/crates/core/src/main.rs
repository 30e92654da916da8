use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use enkf_smcs::experiments::{self, io, presets, ExperimentConfig};
use enkf_smcs::parallel::Execution;
use enkf_smcs::smcs::Algorithm;
use enkf_smcs::{Error, ObservationRecord, Result};

/// Sequential Bayesian parameter estimation with EnKF, EnKF-SMCS and EnKF-SMCS-WR.
#[derive(Parser)]
#[command(name = "enkf-smcs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic observations (`--seed` sets the data seed).
    Simulate(Common),
    /// Run one algorithm with one sampler seed.
    Infer {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run several algorithms over the seed list on one data set.
    Compare {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        run: RunArgs,
    },
    /// List the built-in configurations.
    Presets,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration name instead of `--config`.
    #[arg(long)]
    preset: Option<String>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (defaults to the configuration's `output`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// Algorithm(s): enkf_only, enkf_smcs, enkf_smcs_wr.
    #[arg(long)]
    algorithm: Vec<Algorithm>,
    /// Ensemble size override.
    #[arg(long)]
    particles: Option<usize>,
    /// Observation CSV; simulated from the configuration when omitted.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run particle loops on one thread.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    match (&common.config, &common.preset) {
        (Some(path), _) => ExperimentConfig::load(path),
        (None, Some(name)) => presets::load(name),
        (None, None) => Err(Error::Config("either --config or --preset is required".into())),
    }
}

fn output_dir(common: &Common, config: &ExperimentConfig) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(&config.output))
}

fn apply_run_overrides(config: &mut ExperimentConfig, common: &Common, run: &RunArgs) -> Result<()> {
    if let Some(seed) = common.seed {
        config.seeds = vec![seed];
    }
    if let Some(m) = run.particles {
        config.sampler.particles = m;
    }
    if !run.algorithm.is_empty() {
        config.algorithms = run.algorithm.clone();
        config.sampler.algorithm = run.algorithm[0];
    }
    config.validate()
}

fn observations(config: &ExperimentConfig, run: &RunArgs, out: &Path) -> Result<Vec<ObservationRecord>> {
    match &run.data {
        Some(path) => io::read_observations(path),
        None => {
            let data = experiments::simulate(config)?;
            experiments::write_simulation(out, config, &data)?;
            Ok(data)
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets => {
            for name in presets::names() {
                println!("{name}");
            }
        }
        Command::Simulate(common) => {
            let mut config = load_config(&common)?;
            if let Some(seed) = common.seed {
                config.data_seed = seed;
            }
            let out = output_dir(&common, &config);
            let data = experiments::simulate(&config)?;
            let path = experiments::write_simulation(&out, &config, &data)?;
            println!("wrote {} observations to {}", data.len(), path.display());
        }
        Command::Infer { common, run } => {
            let mut config = load_config(&common)?;
            apply_run_overrides(&mut config, &common, &run)?;
            let out = output_dir(&common, &config);
            let data = observations(&config, &run, &out)?;
            let (algorithm, seed) = (config.sampler.algorithm, config.seeds[0]);
            let (records, summary) = experiments::infer(&config, &data, algorithm, seed, run.exec())?;
            experiments::write_infer(&out, &records, &summary)?;
            println!(
                "{algorithm} seed {seed}: {} steps, {} model evaluations, exact weights at {} steps; results in {}",
                summary.run.steps,
                summary.run.total_model_evals,
                summary.run.refinement_steps.len(),
                out.display()
            );
        }
        Command::Compare { common, run } => {
            let mut config = load_config(&common)?;
            apply_run_overrides(&mut config, &common, &run)?;
            let out = output_dir(&common, &config);
            let data = observations(&config, &run, &out)?;
            let (tables, report) = experiments::compare(&config, &data, run.exec())?;
            experiments::write_compare(&out, &tables, &report)?;
            for agg in &report.aggregates {
                let bias: Vec<String> = agg.final_mean_abs_bias.iter().map(|b| format!("{b:.4}")).collect();
                println!("{:<13} mean |bias| [{}]", agg.algorithm.as_str(), bias.join(", "));
            }
            for w in &report.wins_vs_enkf {
                println!("{:<13} |bias| <= EnKF in {}/{} parameters", w.algorithm.as_str(), w.wins, w.parameters);
            }
            println!("report in {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.root() {
                Error::Config(_) | Error::Dimension(_) => ExitCode::from(2),
                _ if e.is_numerical() => {
                    if let Some(step) = e.step() {
                        eprintln!("failed at step {step}");
                    }
                    ExitCode::from(3)
                }
                _ => ExitCode::from(1),
            }
        }
    }
}
