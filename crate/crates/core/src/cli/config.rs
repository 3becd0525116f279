use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::critpoints::{PredictorVariant, DEFAULT_GAMMA};
use crate::error::{Error, Result};
use crate::hmm::TrainConfig;
use crate::modelselect::{SensorRange, SweepConfig};
use crate::preprocess::DEFAULT_LENGTH;

/// Full pipeline configuration, read from a single JSON document.
///
/// Every field is optional; defaults are M = 64, γ = 1, c ∈ {4..11},
/// n ∈ {2..16}, all three predictor variants, and the sensor ranges
/// "All sensors" (1..J) and "Fingers only" (1..5).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub resample_length: usize,
    pub gamma: usize,
    pub cluster_range: [usize; 2],
    pub state_range: [usize; 2],
    pub predictor_variants: Vec<PredictorVariant>,
    pub sensor_ranges: Vec<SensorRange>,
    /// `train.seed` is ignored; job seeds derive from `seed`.
    pub train: TrainConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset_root: PathBuf::from("data"),
            resample_length: DEFAULT_LENGTH,
            gamma: DEFAULT_GAMMA,
            cluster_range: [4, 11],
            state_range: [2, 16],
            predictor_variants: PredictorVariant::ALL.to_vec(),
            sensor_ranges: vec![
                SensorRange::new("All sensors", 1, None),
                SensorRange::new("Fingers only", 1, Some(5)),
            ],
            train: TrainConfig::default(),
            seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks every invariant; all failures are [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        let [c_lo, c_hi] = self.cluster_range;
        if c_lo < 2 || c_lo > c_hi {
            return fail(format!("cluster_range [{c_lo}, {c_hi}] must satisfy 2 <= c_l <= c_h"));
        }
        let [s_lo, s_hi] = self.state_range;
        if s_lo < 1 || s_lo > s_hi {
            return fail(format!("state_range [{s_lo}, {s_hi}] must satisfy 1 <= st_l <= st_h"));
        }
        if self.resample_length < 4 {
            return fail(format!("resample_length {} must be >= 4", self.resample_length));
        }
        if self.gamma < 1 {
            return fail("gamma must be >= 1".into());
        }
        if self.predictor_variants.is_empty() {
            return fail("predictor_variants is empty".into());
        }
        let mut seen = self.predictor_variants.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.predictor_variants.len() {
            return fail("predictor_variants lists a variant twice".into());
        }
        if self.sensor_ranges.is_empty() {
            return fail("sensor_ranges is empty".into());
        }
        for r in &self.sensor_ranges {
            if r.first < 1 || r.last.is_some_and(|l| l < r.first) {
                return fail(format!("sensor range {:?} is empty", r.label));
            }
        }
        self.train.validate().map_err(|e| Error::Config(format!("train: {e}")))
    }

    pub fn clusters(&self) -> Vec<usize> {
        (self.cluster_range[0]..=self.cluster_range[1]).collect()
    }

    pub fn sweep(&self) -> SweepConfig {
        SweepConfig {
            min_states: self.state_range[0],
            max_states: self.state_range[1],
            train: TrainConfig {
                seed: self.seed,
                ..self.train
            },
        }
    }

    /// Union of all sensor ranges, sorted, for a dataset with `sensors` rows.
    pub fn sensors_in_scope(&self, sensors: usize) -> Result<Vec<usize>> {
        let mut all = Vec::new();
        for r in &self.sensor_ranges {
            all.extend(r.resolve(sensors)?);
        }
        all.sort_unstable();
        all.dedup();
        Ok(all)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_the_reference_setup() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.resample_length, 64);
        assert_eq!(c.gamma, 1);
        assert_eq!(c.clusters(), (4..=11).collect::<Vec<_>>());
        assert_eq!(c.predictor_variants.len(), 3);
        assert_eq!(c.sensors_in_scope(10).unwrap(), (1..=10).collect::<Vec<_>>());
        assert!(c.sensors_in_scope(4).is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"cluster_range": [4, 5], "seed": 3}"#).unwrap();
        assert_eq!(c.cluster_range, [4, 5]);
        assert_eq!(c.seed, 3);
        assert_eq!(c.state_range, [2, 16]);
        assert!(serde_json::from_str::<RunConfig>(r#"{"clusters": 3}"#).is_err());
    }

    #[test]
    fn every_invariant_is_checked() {
        let bad = [
            RunConfig { cluster_range: [1, 4], ..Default::default() },
            RunConfig { cluster_range: [6, 4], ..Default::default() },
            RunConfig { state_range: [0, 4], ..Default::default() },
            RunConfig { state_range: [5, 4], ..Default::default() },
            RunConfig { resample_length: 3, ..Default::default() },
            RunConfig { gamma: 0, ..Default::default() },
            RunConfig { predictor_variants: vec![], ..Default::default() },
            RunConfig { sensor_ranges: vec![], ..Default::default() },
            RunConfig { sensor_ranges: vec![SensorRange::new("x", 3, Some(2))], ..Default::default() },
            RunConfig { train: TrainConfig { restarts: 0, ..TrainConfig::default() }, ..Default::default() },
        ];
        for c in bad {
            assert!(matches!(c.validate(), Err(Error::Config(_))), "{c:?}");
        }
    }
}
