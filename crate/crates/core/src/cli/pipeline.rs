//! End-to-end run: preprocess → critical points → codebooks → pairs → sweeps → ξ.

use std::collections::BTreeMap;

use crate::critpoints::CpStats;
use crate::dataset::RawDataset;
use crate::error::{Error, Result};
use crate::modelselect::{build_pairs, sweep_all, xi_records, Grid, SweepResult, TrainingPair, XiRecord};
use crate::par::{self, Execution};
use crate::preprocess::{preprocess_dataset, Preprocessed};
use crate::quantize::{encode, fit_codebook, Codebook, SymbolSequence};
use crate::seed;

use super::RunConfig;

/// Everything a pipeline run produced, in deterministic order.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub preprocessed: Preprocessed,
    pub cp: CpStats,
    pub codebooks: BTreeMap<usize, Codebook>,
    pub pairs: Vec<TrainingPair>,
    pub sweeps: Vec<SweepResult>,
    pub records: Vec<XiRecord>,
    pub sensors: usize,
}

/// Preprocessing and critical-point statistics only.
pub fn analyze(dataset: &RawDataset, config: &RunConfig, exec: Execution) -> Result<(Preprocessed, CpStats)> {
    let pre = preprocess_dataset(dataset, config.resample_length, exec)?;
    let cp = CpStats::compute(&pre, config.gamma)?;
    Ok((pre, cp))
}

/// One global codebook per cluster count over every normalized value.
pub fn fit_codebooks(pre: &Preprocessed, clusters: &[usize], base_seed: u64, exec: Execution) -> Result<BTreeMap<usize, Codebook>> {
    let pooled: Vec<f64> = pre.sequences.iter().flat_map(|s| s.values.iter().copied()).collect();
    let fitted = par::map(clusters, exec, |&c| {
        fit_codebook(&pooled, c, seed::derive(base_seed, &[0xC0DE, c as u64])).map(|cb| (c, cb))
    });
    fitted.into_iter().collect()
}

pub fn run_pipeline(dataset: &RawDataset, config: &RunConfig, exec: Execution) -> Result<PipelineRun> {
    config.validate()?;
    let sensors_in_scope = config.sensors_in_scope(dataset.sensors())?;
    let (pre, cp) = analyze(dataset, config, exec)?;
    if pre.sequences.is_empty() {
        return Err(Error::DegenerateInput("every sequence has zero variance".into()));
    }

    let clusters = config.clusters();
    let codebooks = fit_codebooks(&pre, &clusters, config.seed, exec)?;

    let in_scope: Vec<_> = pre
        .sequences
        .iter()
        .filter(|s| sensors_in_scope.contains(&s.origin.sensor))
        .collect();
    let mut encoded: Vec<SymbolSequence> = Vec::with_capacity(in_scope.len() * clusters.len());
    for cb in codebooks.values() {
        encoded.extend(par::map(&in_scope, exec, |s| encode(s, cb)));
    }

    let grid = Grid {
        gestures: (1..=dataset.gestures()).collect(),
        sensors: sensors_in_scope,
        clusters,
    };
    let pairs = build_pairs(&encoded, &cp.medians, &grid)?;
    let sweeps = sweep_all(&pairs, &config.sweep(), exec)?;
    let records = xi_records(&pairs, &sweeps, &config.predictor_variants);
    Ok(PipelineRun {
        preprocessed: pre,
        cp,
        codebooks,
        pairs,
        sweeps,
        records,
        sensors: dataset.sensors(),
    })
}
