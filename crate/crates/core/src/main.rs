use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmmstates::cli::{self, ExperimentMode, RunConfig};
use hmmstates::par::Execution;
use hmmstates::{Error, Result};

#[derive(Parser)]
#[command(name = "hmmstates", version, about = "Critical-point predictor of HMM state counts, rated by AIC sweeps")]
struct Args {
    /// JSON run configuration; defaults apply to every missing field.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured (or spec) seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the sweep (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from a spec file into --out.
    Generate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Average critical-point counts per gesture and per sensor.
    Stats {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Run Experiment A (clusters pooled) or B (per cluster count).
    Experiment {
        #[arg(long, value_parser = parse_mode)]
        mode: ExperimentMode,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Pick the most likely model for a symbol sequence.
    Classify {
        /// Directory of `<label>.hmm` model files.
        #[arg(long)]
        models: PathBuf,
        /// File with one comma-separated sequence of 1-based symbols.
        #[arg(long)]
        sequence: PathBuf,
    },
    /// Train one model from a file of symbol sequences (one per line).
    Train {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        states: usize,
        #[arg(long)]
        alphabet: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check a config and its dataset without computing anything.
    Validate {
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> std::result::Result<ExperimentMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(args: &Args, dataset: Option<&PathBuf>) -> Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(d) = dataset {
        config.dataset_root = d.clone();
    }
    config.validate()?;
    Ok(config)
}

fn run(args: &Args) -> Result<()> {
    match &args.command {
        Command::Generate { spec } => {
            let out = args
                .out
                .as_ref()
                .ok_or_else(|| Error::Config("generate needs --out <dir>".into()))?;
            let d = cli::cmd_generate(spec, out, args.seed)?;
            println!(
                "wrote {} gestures x {} executions ({} sensors) to {}",
                d.gestures(),
                d.executions(),
                d.sensors(),
                out.display()
            );
        }
        Command::Stats { dataset } => {
            let config = load_config(args, dataset.as_ref())?;
            let report = hmmstates::par::with_jobs(args.jobs, || cli::cmd_stats(&config, Execution::Parallel))?;
            println!("gesture,avg_cp");
            for (g, a) in &report.tables.by_gesture {
                println!("{g},{a}");
            }
            println!("sensor,avg_cp");
            for (s, a) in &report.tables.by_sensor {
                println!("{s},{a}");
            }
            for f in &report.files {
                eprintln!("wrote {}", f.display());
            }
        }
        Command::Experiment { mode, dataset } => {
            let config = load_config(args, dataset.as_ref())?;
            let report = cli::cmd_experiment(&config, *mode, args.jobs)?;
            eprintln!(
                "{} pairs x {} state counts swept",
                report.run.pairs.len(),
                config.state_range[1] - config.state_range[0] + 1
            );
            for f in &report.files {
                println!("{}", f.display());
            }
        }
        Command::Classify { models, sequence } => {
            let result = cli::cmd_classify(models, sequence)?;
            for (label, ll) in &result.scores {
                println!("{label}\t{ll}");
            }
            println!("{}", result.label);
        }
        Command::Train {
            input,
            states,
            alphabet,
            output,
        } => {
            let config = load_config(args, None)?;
            let train = hmmstates::hmm::TrainConfig {
                seed: config.seed,
                ..config.train
            };
            let report = cli::cmd_train(input, *states, *alphabet, &train, output)?;
            println!(
                "log-likelihood {} after {} iterations (restart {} of {})",
                report.final_loglik(),
                report.iterations,
                report.best_restart + 1,
                report.restarts_used
            );
        }
        Command::Validate { dataset } => {
            let config = load_config(args, dataset.as_ref())?;
            let v = cli::cmd_validate(&config)?;
            println!(
                "ok: I={} J={} K={}, lengths {}..={}, {} training pairs",
                v.gestures, v.sensors, v.executions, v.min_length, v.max_length, v.pairs
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
