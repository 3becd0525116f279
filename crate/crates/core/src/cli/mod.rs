//! Command implementations behind the `hmmstates` binary.
//!
//! Each `cmd_*` function does the work of one subcommand and returns what it
//! produced, so the commands can be driven from tests without a process.

mod config;
pub mod pipeline;
pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub use config::RunConfig;
pub use pipeline::{run_pipeline, PipelineRun};

use crate::dataset::{generate_to_dir, load_dataset, RawDataset, SyntheticSpec};
use crate::error::{Error, Result};
use crate::hmm::{argmax_label, baum_welch, score_models, Hmm, TrainConfig, TrainReport};
use crate::modelselect::{experiment_a_table, experiment_b_table, xi_by_group, GroupBy};
use crate::par::{self, Execution};
use report::CpTables;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentMode {
    /// All cluster counts pooled into one data set.
    A,
    /// One data set per cluster count.
    B,
}

impl FromStr for ExperimentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ExperimentMode::A),
            "B" | "b" => Ok(ExperimentMode::B),
            other => Err(Error::Config(format!("unknown experiment mode {other:?}, expected A or B"))),
        }
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Reads a synthetic spec file, optionally overriding its seed, and writes
/// the generated corpus to `out`.
pub fn cmd_generate(spec_path: &Path, out: &Path, seed: Option<u64>) -> Result<RawDataset> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::io(spec_path, e))?;
    let mut spec: SyntheticSpec = serde_json::from_str(&text).map_err(|e| Error::Spec(format!("{}: {e}", spec_path.display())))?;
    if let Some(seed) = seed {
        spec.rng_seed = seed;
    }
    generate_to_dir(&spec, out)
}

/// Critical-point tables written by [`cmd_stats`].
#[derive(Debug, Clone)]
pub struct StatsReport {
    pub tables: CpTables,
    pub medians: BTreeMap<(usize, usize), usize>,
    pub files: Vec<PathBuf>,
}

/// Average critical-point counts per gesture and per sensor, plus the
/// per-(gesture, sensor) medians.
pub fn cmd_stats(config: &RunConfig, exec: Execution) -> Result<StatsReport> {
    config.validate()?;
    let dataset = load_dataset(&config.dataset_root)?;
    config.sensors_in_scope(dataset.sensors())?;
    let (pre, stats) = pipeline::analyze(&dataset, config, exec)?;
    let tables = CpTables::from_stats(&stats)?;
    ensure_dir(&config.output_dir)?;
    let mut files = report::write_cp_tables(&config.output_dir, &tables, &stats)?;
    files.push(report::write_excluded(&config.output_dir.join("excluded.csv"), &pre.excluded)?);
    Ok(StatsReport {
        tables,
        medians: stats.medians,
        files,
    })
}

/// Files written by [`cmd_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub run: PipelineRun,
    pub files: Vec<PathBuf>,
}

/// Runs the full pipeline and writes the per-record CSV, the sweep CSV, the
/// codebooks, and the aggregate tables for `mode`.
///
/// `jobs` sizes the worker pool (0 = all cores).
pub fn cmd_experiment(config: &RunConfig, mode: ExperimentMode, jobs: usize) -> Result<ExperimentReport> {
    config.validate()?;
    let dataset = load_dataset(&config.dataset_root)?;
    let run = par::with_jobs(jobs, || run_pipeline(&dataset, config, Execution::Parallel))?;

    let out = &config.output_dir;
    ensure_dir(out)?;
    let mut files = vec![
        report::write_records(&out.join("records.csv"), &run.records)?,
        report::write_sweeps(&out.join("sweeps.csv"), &run.sweeps)?,
        report::write_excluded(&out.join("excluded.csv"), &run.preprocessed.excluded)?,
    ];
    for (c, cb) in &run.codebooks {
        let path = out.join(format!("codebook_c{c}.txt"));
        cb.save(&path)?;
        files.push(path);
    }

    let variants = &config.predictor_variants;
    match mode {
        ExperimentMode::A => {
            let rows = experiment_a_table(&run.records, variants, &config.sensor_ranges, run.sensors)?;
            files.push(report::write_xi_table(&out.join("experiment_a.csv"), &rows, false)?);
            let by_gesture = xi_by_group(&run.records, variants, GroupBy::Gesture)?;
            files.push(report::write_xi_groups(&out.join("xi_by_gesture.csv"), "gesture", variants, &by_gesture)?);
            let by_sensor = xi_by_group(&run.records, variants, GroupBy::Sensor)?;
            files.push(report::write_xi_groups(&out.join("xi_by_sensor.csv"), "sensor", variants, &by_sensor)?);
        }
        ExperimentMode::B => {
            let rows = experiment_b_table(
                &run.records,
                variants,
                &config.sensor_ranges,
                &config.clusters(),
                run.sensors,
            )?;
            files.push(report::write_xi_table(&out.join("experiment_b.csv"), &rows, true)?);
        }
    }
    Ok(ExperimentReport { run, files })
}

/// Parses a sequence file: 1-based symbols separated by commas or whitespace.
pub fn read_symbols(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_symbols(&text).map_err(|message| Error::Parse {
        location: path.display().to_string(),
        message,
    })
}

fn parse_symbols(line: &str) -> std::result::Result<Vec<usize>, String> {
    line.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| format!("{t:?}: {e}")))
        .collect()
}

/// Loads every `*.hmm` file in `dir`; the label is the file stem.
pub fn load_models(dir: &Path) -> Result<BTreeMap<String, Hmm>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::ModelLoad {
        path: dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut models = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|e| e == "hmm") {
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            models.insert(label, Hmm::load(&path)?);
        }
    }
    if models.is_empty() {
        return Err(Error::ModelLoad {
            path: dir.to_path_buf(),
            message: "no .hmm model files".into(),
        });
    }
    Ok(models)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    /// Log-likelihood per label, in label order.
    pub scores: Vec<(String, f64)>,
}

pub fn cmd_classify(models_dir: &Path, sequence: &Path) -> Result<Classification> {
    let models = load_models(models_dir)?;
    let symbols = read_symbols(sequence)?;
    let scores = score_models(&models, &symbols)?;
    Ok(Classification {
        label: argmax_label(&scores).to_string(),
        scores,
    })
}

/// Trains one model from a file with one comma-separated sequence per line
/// and writes it in the text model format.
pub fn cmd_train(input: &Path, states: usize, alphabet: usize, train: &TrainConfig, output: &Path) -> Result<TrainReport> {
    let text = fs::read_to_string(input).map_err(|e| Error::io(input, e))?;
    let sequences = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            parse_symbols(l).map_err(|message| Error::Parse {
                location: format!("{} line {}", input.display(), n + 1),
                message,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (model, report) = baum_welch(&sequences, states, alphabet, train)?;
    model.save(output)?;
    Ok(report)
}

/// What [`cmd_validate`] found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub gestures: usize,
    pub sensors: usize,
    pub executions: usize,
    pub min_length: usize,
    pub max_length: usize,
    pub pairs: usize,
}

/// Checks the config and the dataset it points at without running anything.
pub fn cmd_validate(config: &RunConfig) -> Result<Validation> {
    config.validate()?;
    let d = load_dataset(&config.dataset_root)?;
    let sensors = config.sensors_in_scope(d.sensors())?;
    let lengths: Vec<usize> = d.iter().map(|(_, _, m)| m.len()).collect();
    Ok(Validation {
        gestures: d.gestures(),
        sensors: d.sensors(),
        executions: d.executions(),
        min_length: lengths.iter().copied().min().unwrap_or(0),
        max_length: lengths.iter().copied().max().unwrap_or(0),
        pairs: d.gestures() * sensors.len() * config.clusters().len(),
    })
}
