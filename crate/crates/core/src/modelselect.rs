//! State-count selection: AIC sweeps over trained models and the ξ measure
//! of how close a predicted state count lands to the AIC minimum.
//!
//! For each training pair (gesture `i`, sensor `j`, alphabet size `c`) a
//! model is trained for every state count in `[st_l, st_h]` and scored with
//! `AIC = -2 Σ_k log p(O_k | λ) + 2 n²`. A predicted count `n̂` is rated by
//!
//! ```text
//! ξ = (AIC(n̂) - AIC_min) / (AIC_max - AIC_min)   ∈ [0, 1]
//! ```
//!
//! and experiments average ξ over pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::critpoints::PredictorVariant;
use crate::error::{Error, Result};
use crate::hmm::{baum_welch, forward_log_likelihood, TrainConfig};
use crate::par::{self, Execution};
use crate::quantize::SymbolSequence;
use crate::seed;

/// `(gesture, sensor, clusters)`, all 1-based except `clusters` which is `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId {
    pub gesture: usize,
    pub sensor: usize,
    pub clusters: usize,
}

/// The executions of one (gesture, sensor) discretized with `c` clusters,
/// together with their median critical-point count.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    pub id: PairId,
    pub sequences: Vec<SymbolSequence>,
    pub cp_median: usize,
}

/// Index grid a set of pairs must cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid {
    pub gestures: Vec<usize>,
    pub sensors: Vec<usize>,
    pub clusters: Vec<usize>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.gestures.len() * self.sensors.len() * self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every id in `(gesture, sensor, clusters)` order.
    pub fn ids(&self) -> impl Iterator<Item = PairId> + '_ {
        self.gestures.iter().flat_map(move |&gesture| {
            self.sensors.iter().flat_map(move |&sensor| {
                self.clusters.iter().map(move |&clusters| PairId {
                    gesture,
                    sensor,
                    clusters,
                })
            })
        })
    }
}

/// Groups encoded sequences into one pair per grid cell.
///
/// `sequences` may hold several alphabet sizes; a sequence belongs to the
/// cell whose `clusters` equals its alphabet. Cells without sequences or
/// without a median are reported as [`Error::IncompleteGrid`].
pub fn build_pairs(
    sequences: &[SymbolSequence],
    medians: &BTreeMap<(usize, usize), usize>,
    grid: &Grid,
) -> Result<Vec<TrainingPair>> {
    let mut cells: BTreeMap<PairId, Vec<SymbolSequence>> = BTreeMap::new();
    for s in sequences {
        let id = PairId {
            gesture: s.origin.gesture,
            sensor: s.origin.sensor,
            clusters: s.alphabet,
        };
        cells.entry(id).or_default().push(s.clone());
    }

    let mut pairs = Vec::with_capacity(grid.len());
    for id in grid.ids() {
        let mut seqs = cells.remove(&id).unwrap_or_default();
        if seqs.is_empty() {
            return Err(Error::IncompleteGrid(format!(
                "no sequences for gesture {}, sensor {}, c = {}",
                id.gesture, id.sensor, id.clusters
            )));
        }
        seqs.sort_by_key(|s| s.origin.execution);
        let len = seqs[0].symbols.len();
        if seqs.iter().any(|s| s.symbols.len() != len) {
            return Err(Error::IncompleteGrid(format!(
                "sequences of gesture {}, sensor {} differ in length",
                id.gesture, id.sensor
            )));
        }
        let cp_median = *medians.get(&(id.gesture, id.sensor)).ok_or_else(|| {
            Error::IncompleteGrid(format!(
                "no critical-point median for gesture {}, sensor {}",
                id.gesture, id.sensor
            ))
        })?;
        pairs.push(TrainingPair {
            id,
            sequences: seqs,
            cp_median,
        });
    }
    Ok(pairs)
}

/// `-2 · sum_loglik + 2 n²`; an impossible model (`-inf` or NaN likelihood)
/// scores `+inf`.
pub fn aic(sum_loglik: f64, states: usize) -> f64 {
    if !sum_loglik.is_finite() {
        return f64::INFINITY;
    }
    let q = (states * states) as f64;
    -2.0 * sum_loglik + 2.0 * q
}

/// Inclusive state-count range `[st_l, st_h]` plus training settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub min_states: usize,
    pub max_states: usize,
    /// `seed` here is the base from which every (pair, n) job seed is derived.
    pub train: TrainConfig,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_states < 1 || self.min_states > self.max_states {
            return Err(Error::Param(format!(
                "state range [{}, {}] must satisfy 1 <= st_l <= st_h",
                self.min_states, self.max_states
            )));
        }
        self.train.validate()
    }

    pub fn clamp(&self, states: usize) -> usize {
        states.clamp(self.min_states, self.max_states)
    }

    /// Seed of the training job for `(pair, n)`.
    pub fn job_seed(&self, id: PairId, states: usize) -> u64 {
        seed::derive(
            self.train.seed,
            &[
                id.gesture as u64,
                id.sensor as u64,
                id.clusters as u64,
                states as u64,
            ],
        )
    }
}

/// AIC for every state count of one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub id: PairId,
    pub aic_by_n: BTreeMap<usize, f64>,
    pub aic_min: f64,
    pub aic_max: f64,
    /// Smallest state count attaining `aic_min`.
    pub argmin_n: usize,
}

impl SweepResult {
    pub fn from_scores(id: PairId, aic_by_n: BTreeMap<usize, f64>) -> Self {
        let mut argmin_n = *aic_by_n.keys().next().expect("non-empty sweep");
        let mut aic_min = f64::INFINITY;
        let mut aic_max = f64::NEG_INFINITY;
        for (&n, &a) in &aic_by_n {
            if a < aic_min {
                aic_min = a;
                argmin_n = n;
            }
            aic_max = aic_max.max(a);
        }
        if aic_min == f64::INFINITY {
            aic_min = f64::INFINITY;
            aic_max = f64::INFINITY;
        }
        SweepResult {
            id,
            aic_by_n,
            aic_min,
            aic_max,
            argmin_n,
        }
    }
}

/// Trains `λ(F, n)` and returns `AIC(F, n)`; a failed training scores `+inf`.
pub fn score_states(pair: &TrainingPair, states: usize, config: &SweepConfig) -> f64 {
    let train = TrainConfig {
        seed: config.job_seed(pair.id, states),
        ..config.train
    };
    let Ok((model, _)) = baum_welch(&pair.sequences, states, pair.id.clusters, &train) else {
        return f64::INFINITY;
    };
    let mut total = 0.0;
    for s in &pair.sequences {
        match forward_log_likelihood(&model, &s.symbols) {
            Ok(ll) => total += ll,
            Err(_) => return f64::INFINITY,
        }
    }
    aic(total, states)
}

pub fn sweep_states(pair: &TrainingPair, config: &SweepConfig, exec: Execution) -> Result<SweepResult> {
    sweep_all(std::slice::from_ref(pair), config, exec).map(|mut v| v.remove(0))
}

/// Sweeps every pair as one flat job map over `(pair, n)`.
///
/// Results come back in pair order and do not depend on `exec` or thread count.
pub fn sweep_all(pairs: &[TrainingPair], config: &SweepConfig, exec: Execution) -> Result<Vec<SweepResult>> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| (config.min_states..=config.max_states).map(move |n| (p, n)))
        .collect();
    let scores = par::map(&jobs, exec, |&(p, n)| score_states(&pairs[p], n, config));

    let width = config.max_states - config.min_states + 1;
    Ok(pairs
        .iter()
        .zip(scores.chunks(width))
        .map(|(pair, chunk)| {
            let aic_by_n = (config.min_states..=config.max_states)
                .zip(chunk.iter().copied())
                .collect();
            SweepResult::from_scores(pair.id, aic_by_n)
        })
        .collect())
}

/// Position of `AIC(predicted)` between the sweep's minimum and maximum.
///
/// `predicted` is clamped into the swept range. A flat sweep gives 0. If some
/// trainings failed (`+inf`), a failed prediction gives 1 and finite ones are
/// normalized by the largest finite AIC.
pub fn xi(sweep: &SweepResult, predicted: usize) -> f64 {
    let lo = *sweep.aic_by_n.keys().next().expect("non-empty sweep");
    let hi = *sweep.aic_by_n.keys().next_back().expect("non-empty sweep");
    let aic_cp = sweep.aic_by_n[&predicted.clamp(lo, hi)];
    if sweep.aic_max == sweep.aic_min {
        return 0.0;
    }
    if aic_cp == f64::INFINITY {
        return 1.0;
    }
    let top = sweep
        .aic_by_n
        .values()
        .copied()
        .filter(|a| a.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if top == sweep.aic_min {
        return 0.0;
    }
    ((aic_cp - sweep.aic_min) / (top - sweep.aic_min)).clamp(0.0, 1.0)
}

/// ξ of one pair under one predictor variant.
#[derive(Debug, Clone, PartialEq)]
pub struct XiRecord {
    pub id: PairId,
    pub variant: PredictorVariant,
    /// After the variant offset and clamping into the swept range.
    pub predicted_n: usize,
    pub argmin_n: usize,
    pub aic_min: f64,
    pub aic_max: f64,
    pub aic_cp: f64,
    pub xi: f64,
}

/// One record per `(pair, variant)`, pair-major.
pub fn xi_records(
    pairs: &[TrainingPair],
    sweeps: &[SweepResult],
    variants: &[PredictorVariant],
) -> Vec<XiRecord> {
    let mut out = Vec::with_capacity(sweeps.len() * variants.len());
    for (pair, sweep) in pairs.iter().zip(sweeps) {
        debug_assert_eq!(pair.id, sweep.id);
        let lo = *sweep.aic_by_n.keys().next().expect("non-empty sweep");
        let hi = *sweep.aic_by_n.keys().next_back().expect("non-empty sweep");
        for &variant in variants {
            let predicted_n = variant.apply(pair.cp_median).clamp(lo, hi);
            out.push(XiRecord {
                id: sweep.id,
                variant,
                predicted_n,
                argmin_n: sweep.argmin_n,
                aic_min: sweep.aic_min,
                aic_max: sweep.aic_max,
                aic_cp: sweep.aic_by_n[&predicted_n],
                xi: xi(sweep, predicted_n),
            });
        }
    }
    out
}

/// Mean of `values`, summed in sorted order so the result does not depend on
/// the order of the input.
pub fn order_free_mean(values: impl IntoIterator<Item = f64>) -> Result<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    if v.is_empty() {
        return Err(Error::EmptyInput);
    }
    v.sort_by(f64::total_cmp);
    Ok(v.iter().sum::<f64>() / v.len() as f64)
}

/// Average ξ over records.
pub fn aggregate_xi<'a>(records: impl IntoIterator<Item = &'a XiRecord>) -> Result<f64> {
    order_free_mean(records.into_iter().map(|r| r.xi))
}

/// A named inclusive range of 1-based sensor indices; `last = None` means
/// "through the last sensor".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorRange {
    pub label: String,
    pub first: usize,
    #[serde(default)]
    pub last: Option<usize>,
}

impl SensorRange {
    pub fn new(label: impl Into<String>, first: usize, last: Option<usize>) -> Self {
        SensorRange {
            label: label.into(),
            first,
            last,
        }
    }

    /// Concrete sensor indices for a dataset with `sensors` rows.
    pub fn resolve(&self, sensors: usize) -> Result<Vec<usize>> {
        let last = self.last.unwrap_or(sensors);
        if self.first < 1 || last < self.first {
            return Err(Error::Config(format!(
                "sensor range {:?} is empty",
                self.label
            )));
        }
        if last > sensors {
            return Err(Error::Config(format!(
                "sensor range {:?} ends at {last} but the dataset has {sensors} sensors",
                self.label
            )));
        }
        Ok((self.first..=last).collect())
    }
}

/// One row of an aggregate ξ table: a label and one value per variant.
#[derive(Debug, Clone, PartialEq)]
pub struct XiRow {
    pub label: String,
    pub range: String,
    pub clusters: Option<usize>,
    pub cells: Vec<(PredictorVariant, f64)>,
}

fn row_for(
    label: String,
    range: &SensorRange,
    clusters: Option<usize>,
    sensors: &[usize],
    records: &[XiRecord],
    variants: &[PredictorVariant],
) -> Result<XiRow> {
    let cells = variants
        .iter()
        .map(|&v| {
            let scoped = records.iter().filter(|r| {
                r.variant == v
                    && sensors.contains(&r.id.sensor)
                    && clusters.is_none_or(|c| r.id.clusters == c)
            });
            aggregate_xi(scoped).map(|x| (v, x)).map_err(|_| {
                Error::IncompleteGrid(format!("no records for {label:?}, variant {v}"))
            })
        })
        .collect::<Result<_>>()?;
    Ok(XiRow {
        label,
        range: range.label.clone(),
        clusters,
        cells,
    })
}

/// Aggregate ξ per (sensor range, variant) over all cluster counts.
pub fn experiment_a_table(
    records: &[XiRecord],
    variants: &[PredictorVariant],
    ranges: &[SensorRange],
    sensors: usize,
) -> Result<Vec<XiRow>> {
    ranges
        .iter()
        .map(|range| {
            let members = range.resolve(sensors)?;
            row_for(range.label.clone(), range, None, &members, records, variants)
        })
        .collect()
}

/// Aggregate ξ per (cluster count, sensor range, variant); rows are
/// cluster-major, e.g. "All sensors, c = 4", "Fingers only, c = 4", ...
pub fn experiment_b_table(
    records: &[XiRecord],
    variants: &[PredictorVariant],
    ranges: &[SensorRange],
    clusters: &[usize],
    sensors: usize,
) -> Result<Vec<XiRow>> {
    let mut rows = Vec::with_capacity(clusters.len() * ranges.len());
    for &c in clusters {
        for range in ranges {
            let members = range.resolve(sensors)?;
            let label = format!("{}, c = {c}", range.label);
            rows.push(row_for(label, range, Some(c), &members, records, variants)?);
        }
    }
    Ok(rows)
}

/// Runs the sweep over `pairs` and tabulates Experiment A.
pub fn experiment_a(
    pairs: &[TrainingPair],
    variants: &[PredictorVariant],
    ranges: &[SensorRange],
    sensors: usize,
    config: &SweepConfig,
    exec: Execution,
) -> Result<(Vec<XiRow>, Vec<XiRecord>)> {
    let sweeps = sweep_all(pairs, config, exec)?;
    let records = xi_records(pairs, &sweeps, variants);
    Ok((experiment_a_table(&records, variants, ranges, sensors)?, records))
}

/// Runs the sweep over `pairs` and tabulates Experiment B.
pub fn experiment_b(
    pairs: &[TrainingPair],
    variants: &[PredictorVariant],
    ranges: &[SensorRange],
    sensors: usize,
    config: &SweepConfig,
    exec: Execution,
) -> Result<(Vec<XiRow>, Vec<XiRecord>)> {
    let sweeps = sweep_all(pairs, config, exec)?;
    let records = xi_records(pairs, &sweeps, variants);
    let mut clusters: Vec<usize> = pairs.iter().map(|p| p.id.clusters).collect();
    clusters.sort_unstable();
    clusters.dedup();
    Ok((
        experiment_b_table(&records, variants, ranges, &clusters, sensors)?,
        records,
    ))
}

/// Which key a per-group ξ breakdown averages over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupBy {
    Gesture,
    Sensor,
}

/// Mean ξ per gesture or per sensor: one value per variant plus the mean
/// across variants.
pub fn xi_by_group(
    records: &[XiRecord],
    variants: &[PredictorVariant],
    by: GroupBy,
) -> Result<Vec<(usize, Vec<f64>, f64)>> {
    let key = |r: &XiRecord| match by {
        GroupBy::Gesture => r.id.gesture,
        GroupBy::Sensor => r.id.sensor,
    };
    let mut groups: Vec<usize> = records.iter().map(key).collect();
    groups.sort_unstable();
    groups.dedup();
    groups
        .into_iter()
        .map(|g| {
            let per_variant = variants
                .iter()
                .map(|&v| aggregate_xi(records.iter().filter(|r| key(r) == g && r.variant == v)))
                .collect::<Result<Vec<f64>>>()?;
            let all = aggregate_xi(records.iter().filter(|r| key(r) == g && variants.contains(&r.variant)))?;
            Ok((g, per_variant, all))
        })
        .collect()
}
