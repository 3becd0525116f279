//! Resampling to a common length and mean/deviation normalization.

use serde::Serialize;

use crate::dataset::RawDataset;
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Default resample length.
pub const DEFAULT_LENGTH: usize = 64;

/// Identifies one sensor row `G_j^{i,k}` (all indices 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Origin {
    pub gesture: usize,
    pub sensor: usize,
    pub execution: usize,
}

/// A resampled, zero-mean, unit-deviation sensor row.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedSequence {
    pub values: Vec<f64>,
    pub origin: Origin,
}

impl ProcessedSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Catmull-Rom resampling of `row` onto `target_len` uniformly spaced
/// abscissae spanning the original index range.
///
/// Ghost points beyond the ends are linearly extrapolated, so linear data is
/// reproduced exactly. The first and last samples are preserved exactly.
pub fn resample(row: &[f64], target_len: usize) -> Result<Vec<f64>> {
    let len = row.len();
    if len < 2 || target_len < 2 {
        return Err(Error::Length(format!(
            "resample needs input and output length >= 2, got {len} -> {target_len}"
        )));
    }
    let at = |idx: isize| -> f64 {
        if idx < 0 {
            2.0 * row[0] - row[1]
        } else if idx as usize >= len {
            2.0 * row[len - 1] - row[len - 2]
        } else {
            row[idx as usize]
        }
    };

    let mut out = Vec::with_capacity(target_len);
    for m in 0..target_len {
        // exact for m = 0, m = target_len - 1 and whenever len == target_len
        let x = (m * (len - 1)) as f64 / (target_len - 1) as f64;
        let mut seg = x.floor() as usize;
        if seg >= len - 1 {
            seg = len - 2;
        }
        let u = x - seg as f64;
        let s = seg as isize;
        let (p0, p1, p2, p3) = (at(s - 1), at(s), at(s + 1), at(s + 2));
        let m1 = (p2 - p0) / 2.0;
        let m2 = (p3 - p1) / 2.0;
        let (u2, u3) = (u * u, u * u * u);
        let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
        let h10 = u3 - 2.0 * u2 + u;
        let h01 = -2.0 * u3 + 3.0 * u2;
        let h11 = u3 - u2;
        out.push(h00 * p1 + h10 * m1 + h01 * p2 + h11 * m2);
    }
    out[0] = row[0];
    out[target_len - 1] = row[len - 1];
    Ok(out)
}

/// `(x - μ) / σ` with the population deviation (divisor = length).
///
/// Rows whose deviation is zero, or indistinguishable from rounding noise
/// relative to the mean, are rejected with [`Error::ZeroVariance`].
pub fn normalize(row: &[f64]) -> Result<Vec<f64>> {
    if row.is_empty() {
        return Err(Error::ZeroVariance);
    }
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if !(sd > 1e-12 * mean.abs().max(1.0)) {
        return Err(Error::ZeroVariance);
    }
    Ok(row.iter().map(|v| (v - mean) / sd).collect())
}

/// Output of [`preprocess_dataset`]: surviving sequences in `(i, j, k)` order
/// plus the rows dropped for zero variance.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub sequences: Vec<ProcessedSequence>,
    pub excluded: Vec<Origin>,
    pub length: usize,
}

impl Preprocessed {
    pub fn get(&self, origin: Origin) -> Option<&ProcessedSequence> {
        self.sequences
            .binary_search_by(|s| s.origin.cmp(&origin))
            .ok()
            .map(|idx| &self.sequences[idx])
    }
}

/// Resamples and normalizes every row of `dataset`.
pub fn preprocess_dataset(
    dataset: &RawDataset,
    target_len: usize,
    exec: Execution,
) -> Result<Preprocessed> {
    let mut origins = Vec::new();
    for gesture in 1..=dataset.gestures() {
        for sensor in 1..=dataset.sensors() {
            for execution in 1..=dataset.executions() {
                origins.push(Origin {
                    gesture,
                    sensor,
                    execution,
                });
            }
        }
    }
    let results = par::map(&origins, exec, |o| {
        let row = dataset.row(o.gesture, o.sensor, o.execution);
        resample(row, target_len).and_then(|r| normalize(&r))
    });

    let mut sequences = Vec::with_capacity(origins.len());
    let mut excluded = Vec::new();
    for (origin, result) in origins.into_iter().zip(results) {
        match result {
            Ok(values) => sequences.push(ProcessedSequence { values, origin }),
            Err(Error::ZeroVariance) => excluded.push(origin),
            Err(e) => return Err(e),
        }
    }
    Ok(Preprocessed {
        sequences,
        excluded,
        length: target_len,
    })
}
