//! Critical points: endpoints plus windowed local extrema, and the median
//! critical-point predictor of the HMM state count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Origin, Preprocessed};

pub const DEFAULT_GAMMA: usize = 1;

/// Extremum counts of one sequence; `total = maxima + minima + 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CriticalPointCount {
    pub maxima: usize,
    pub minima: usize,
    pub total: usize,
    pub gamma: usize,
}

/// Interior local maxima and minima of `seq` (0-based positions).
///
/// Position `m` (not an endpoint) is a maximum iff `seq[m]` is `>=` every
/// value in the window `[m - gamma, m + gamma]`, with out-of-range indices
/// replaced by the nearest endpoint value, and strictly greater than at least
/// one of them. Within a run of equal values only the leftmost qualifying
/// position is reported. Minima are symmetric.
pub fn find_extrema(seq: &[f64], gamma: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let len = seq.len();
    if len < 3 {
        return Err(Error::Length(format!(
            "extrema need at least 3 samples, got {len}"
        )));
    }
    if gamma == 0 {
        return Err(Error::Param("gamma must be >= 1".into()));
    }

    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    let mut run_start = 0;
    let mut reported_max_run = None;
    let mut reported_min_run = None;
    for m in 1..len - 1 {
        if seq[m] != seq[m - 1] {
            run_start = m;
        }
        let v = seq[m];
        let window = (m.saturating_sub(gamma)..=(m + gamma).min(len - 1)).map(|w| seq[w]);
        // padding repeats endpoint values, which never changes min/max of the window
        let (mut all_le, mut any_lt, mut all_ge, mut any_gt) = (true, false, true, false);
        for w in window {
            all_le &= w <= v;
            any_lt |= w < v;
            all_ge &= w >= v;
            any_gt |= w > v;
        }
        if all_le && any_lt && reported_max_run != Some(run_start) {
            maxima.push(m);
            reported_max_run = Some(run_start);
        }
        if all_ge && any_gt && reported_min_run != Some(run_start) {
            minima.push(m);
            reported_min_run = Some(run_start);
        }
    }
    Ok((maxima, minima))
}

pub fn count_critical_points(seq: &[f64], gamma: usize) -> Result<CriticalPointCount> {
    let (maxima, minima) = find_extrema(seq, gamma)?;
    Ok(CriticalPointCount {
        maxima: maxima.len(),
        minima: minima.len(),
        total: maxima.len() + minima.len() + 2,
        gamma,
    })
}

/// Median of `counts`; the lower middle order statistic when the count is even.
pub fn median_cp(counts: &[usize]) -> Result<usize> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    Ok(sorted[(sorted.len() - 1) / 2])
}

/// Offset applied to the median critical-point count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorVariant {
    /// All critical points, `cp`.
    AllPoints,
    /// Without the two endpoints, `cp - 2`.
    NoBoundaries,
    /// Number of monotone trends, `cp - 1`.
    Trends,
}

impl PredictorVariant {
    pub const ALL: [PredictorVariant; 3] = [
        PredictorVariant::AllPoints,
        PredictorVariant::NoBoundaries,
        PredictorVariant::Trends,
    ];

    pub fn offset(self) -> usize {
        match self {
            PredictorVariant::AllPoints => 0,
            PredictorVariant::NoBoundaries => 2,
            PredictorVariant::Trends => 1,
        }
    }

    /// Predicted state count for a median, floored at one state.
    pub fn apply(self, median: usize) -> usize {
        median.saturating_sub(self.offset()).max(1)
    }

    pub fn name(self) -> &'static str {
        match self {
            PredictorVariant::AllPoints => "all_points",
            PredictorVariant::NoBoundaries => "no_boundaries",
            PredictorVariant::Trends => "trends",
        }
    }
}

impl fmt::Display for PredictorVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredictorVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PredictorVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown predictor variant {s:?}")))
    }
}

/// Per-`(gesture, sensor)` critical-point data of a preprocessed corpus.
#[derive(Debug, Clone, Default)]
pub struct CpStats {
    /// Count for every surviving sequence, in `(i, j, k)` order.
    pub counts: Vec<(Origin, CriticalPointCount)>,
    /// Median total over executions, keyed by `(gesture, sensor)`.
    pub medians: BTreeMap<(usize, usize), usize>,
}

impl CpStats {
    pub fn compute(pre: &Preprocessed, gamma: usize) -> Result<Self> {
        let mut counts = Vec::with_capacity(pre.sequences.len());
        let mut grouped: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for s in &pre.sequences {
            let c = count_critical_points(&s.values, gamma)?;
            grouped
                .entry((s.origin.gesture, s.origin.sensor))
                .or_default()
                .push(c.total);
            counts.push((s.origin, c));
        }
        let medians = grouped
            .into_iter()
            .map(|(key, totals)| median_cp(&totals).map(|m| (key, m)))
            .collect::<Result<_>>()?;
        Ok(CpStats { counts, medians })
    }
}

/// Predicted state count per `(gesture, sensor)` for one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorTable {
    pub variant: PredictorVariant,
    pub values: BTreeMap<(usize, usize), usize>,
}

impl PredictorTable {
    pub fn get(&self, gesture: usize, sensor: usize) -> Option<usize> {
        self.values.get(&(gesture, sensor)).copied()
    }
}

pub fn build_predictor_table(
    medians: &BTreeMap<(usize, usize), usize>,
    variant: PredictorVariant,
) -> PredictorTable {
    PredictorTable {
        variant,
        values: medians
            .iter()
            .map(|(&key, &median)| (key, variant.apply(median)))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn monotone_has_no_interior_extrema() {
        assert_eq!(find_extrema(&[0.0, 1.0, 2.0, 3.0], 1).unwrap(), (vec![], vec![]));
        assert_eq!(count_critical_points(&[0.0, 1.0, 2.0, 3.0], 1).unwrap().total, 2);
    }

    #[test]
    fn zigzag_by_hand() {
        let seq = [0.0, 2.0, 1.0, 3.0, 0.0];
        assert_eq!(find_extrema(&seq, 1).unwrap(), (vec![1, 3], vec![2]));
        let c = count_critical_points(&seq, 1).unwrap();
        assert_eq!((c.maxima, c.minima, c.total), (2, 1, 5));
    }

    #[test]
    fn plateau_reports_leftmost() {
        assert_eq!(find_extrema(&[0.0, 1.0, 1.0, 0.0], 1).unwrap(), (vec![1], vec![]));
        // a plateau wider than the window is still one peak
        assert_eq!(
            find_extrema(&[0.0, 1.0, 1.0, 1.0, 1.0, 0.0], 1).unwrap(),
            (vec![1], vec![])
        );
        assert_eq!(
            find_extrema(&[3.0, 1.0, 1.0, 1.0, 2.0], 1).unwrap(),
            (vec![], vec![1])
        );
    }

    #[test]
    fn wider_window_uses_replication_padding() {
        // position 1 is the largest value within two samples either side
        let seq = [0.0, 5.0, 1.0, 4.0, 2.0, 3.0, 0.0];
        assert_eq!(find_extrema(&seq, 1).unwrap(), (vec![1, 3, 5], vec![2, 4]));
        assert_eq!(find_extrema(&seq, 2).unwrap(), (vec![1], vec![]));
        assert_eq!(find_extrema(&[1.0, 0.0, 3.0, 2.0, 4.0], 2).unwrap(), (vec![], vec![1]));
        // with a huge window only the global extrema survive
        assert_eq!(find_extrema(&seq, 10).unwrap(), (vec![1], vec![]));
    }

    #[test]
    fn too_short_or_zero_gamma() {
        assert!(matches!(find_extrema(&[1.0, 2.0], 1), Err(Error::Length(_))));
        assert!(matches!(find_extrema(&[1.0, 2.0, 1.0], 0), Err(Error::Param(_))));
    }

    #[test]
    fn medians() {
        assert_eq!(median_cp(&[3, 5, 7]).unwrap(), 5);
        assert_eq!(median_cp(&[4, 9, 4, 4]).unwrap(), 4);
        assert_eq!(median_cp(&[2, 8]).unwrap(), 2);
        assert_eq!(median_cp(&[6]).unwrap(), 6);
        assert!(matches!(median_cp(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn predictor_offsets_and_floor() {
        let medians = BTreeMap::from([((1, 1), 7), ((1, 2), 2)]);
        let trends = build_predictor_table(&medians, PredictorVariant::Trends);
        assert_eq!(trends.get(1, 1), Some(6));
        let nb = build_predictor_table(&medians, PredictorVariant::NoBoundaries);
        assert_eq!(nb.get(1, 1), Some(5));
        assert_eq!(nb.get(1, 2), Some(1));
        let all = build_predictor_table(&medians, PredictorVariant::AllPoints);
        assert_eq!(all.get(1, 1), Some(7));
        assert_eq!(PredictorVariant::NoBoundaries.apply(0), 1);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in PredictorVariant::ALL {
            assert_eq!(v.name().parse::<PredictorVariant>().unwrap(), v);
        }
        assert!("cp".parse::<PredictorVariant>().is_err());
    }

    fn seq_strategy() -> impl Strategy<Value = Vec<f64>> {
        // small integer alphabet so ties and plateaus are common
        prop::collection::vec((-4i32..5).prop_map(f64::from), 3..60)
    }

    proptest! {
        #[test]
        fn count_identity_and_disjointness(seq in seq_strategy(), gamma in 1usize..5) {
            let (max, min) = find_extrema(&seq, gamma).unwrap();
            let c = count_critical_points(&seq, gamma).unwrap();
            prop_assert_eq!(c.total, max.len() + min.len() + 2);
            prop_assert!(max.iter().all(|m| !min.contains(m)));
            prop_assert!(max.iter().chain(&min).all(|&m| m > 0 && m < seq.len() - 1));
        }

        #[test]
        fn affine_invariance(seq in seq_strategy(), gamma in 1usize..4, a in 0.01f64..100.0, b in -50.0f64..50.0) {
            let moved: Vec<f64> = seq.iter().map(|x| a * x + b).collect();
            prop_assert_eq!(find_extrema(&seq, gamma).unwrap(), find_extrema(&moved, gamma).unwrap());
        }

        #[test]
        fn strict_maxima_alternate_with_minima(seq in prop::collection::vec(-1e3f64..1e3, 3..60)) {
            let (max, min) = find_extrema(&seq, 1).unwrap();
            for pair in max.windows(2) {
                prop_assert!(min.iter().any(|&m| m > pair[0] && m < pair[1]));
            }
        }

        #[test]
        fn median_is_a_member(counts in prop::collection::vec(0usize..40, 1..30)) {
            let m = median_cp(&counts).unwrap();
            prop_assert!(counts.contains(&m));
        }
    }
}
