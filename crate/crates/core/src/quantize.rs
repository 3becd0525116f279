//! Scalar k-means codebooks and nearest-centroid encoding.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::preprocess::{Origin, ProcessedSequence};
use crate::seed;

pub const MAX_LLOYD_ITERATIONS: usize = 200;

/// Sorted, strictly increasing cluster centroids. Symbol `s` (1-based) is
/// the `s`-th centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    centroids: Vec<f64>,
}

impl Codebook {
    pub fn new(centroids: Vec<f64>) -> Result<Self> {
        if centroids.len() < 2 {
            return Err(Error::Param(format!(
                "a codebook needs at least 2 centroids, got {}",
                centroids.len()
            )));
        }
        if centroids.iter().any(|c| !c.is_finite()) || centroids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Param(
                "centroids must be finite and strictly increasing".into(),
            ));
        }
        Ok(Codebook { centroids })
    }

    pub fn centroids(&self) -> &[f64] {
        &self.centroids
    }

    /// Alphabet size `c`.
    pub fn size(&self) -> usize {
        self.centroids.len()
    }

    /// 1-based symbol of the nearest centroid; ties go to the lower symbol.
    pub fn symbol(&self, value: f64) -> usize {
        nearest(&self.centroids, value) + 1
    }

    /// One centroid per line.
    pub fn to_text(&self) -> String {
        self.centroids.iter().map(|c| format!("{c}\n")).collect()
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let centroids = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .enumerate()
            .map(|(n, l)| {
                l.parse::<f64>().map_err(|e| Error::Parse {
                    location: format!("codebook line {}", n + 1),
                    message: e.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Codebook::new(centroids)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

// index of the nearest centroid, lowest index on ties; centroids need not be sorted
fn nearest(centroids: &[f64], value: f64) -> usize {
    let mut best = 0;
    let mut best_d = (value - centroids[0]).abs();
    for (idx, c) in centroids.iter().enumerate().skip(1) {
        let d = (value - c).abs();
        if d < best_d {
            best = idx;
            best_d = d;
        }
    }
    best
}

/// Codebook plus diagnostics of the Lloyd run that produced it.
#[derive(Debug, Clone)]
pub struct KMeansFit {
    pub codebook: Codebook,
    /// Within-cluster SSE of the initial assignment, then after every iteration.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn sse(values: &[f64], centroids: &[f64], assignment: &[usize]) -> f64 {
    values
        .iter()
        .zip(assignment)
        .map(|(v, &a)| (v - centroids[a]).powi(2))
        .sum()
}

/// Quantile seeding: centroid `t` starts at the `(t - 1/2) / c` quantile.
/// Coinciding seeds are replaced by distinct values drawn with `seed`.
fn initial_centroids(sorted: &[f64], distinct: &[f64], c: usize, seed: u64) -> Vec<f64> {
    let n = sorted.len();
    let mut centroids: Vec<f64> = (1..=c)
        .map(|t| {
            let q = (t as f64 - 0.5) / c as f64;
            sorted[((q * n as f64).floor() as usize).min(n - 1)]
        })
        .collect();
    let mut rng = seed::rng(seed);
    let mut spare: Vec<f64> = distinct
        .iter()
        .copied()
        .filter(|d| !centroids.contains(d))
        .collect();
    spare.shuffle(&mut rng);
    for t in 1..c {
        if centroids[..t].contains(&centroids[t]) {
            centroids[t] = spare.pop().expect("at least c distinct values");
        }
    }
    centroids
}

/// Fits a `c`-centroid codebook to pooled scalar values with Lloyd's algorithm.
pub fn fit_codebook(values: &[f64], c: usize, seed: u64) -> Result<Codebook> {
    fit_codebook_traced(values, c, seed).map(|f| f.codebook)
}

pub fn fit_codebook_traced(values: &[f64], c: usize, seed: u64) -> Result<KMeansFit> {
    if c < 2 {
        return Err(Error::Param(format!("cluster count must be >= 2, got {c}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < c {
        return Err(Error::DegenerateInput(format!(
            "{} distinct values cannot form {c} clusters",
            distinct.len()
        )));
    }

    let mut centroids = initial_centroids(&sorted, &distinct, c, seed);
    let mut assignment: Vec<usize> = values.iter().map(|&v| nearest(&centroids, v)).collect();
    let mut sse_trace = vec![sse(values, &centroids, &assignment)];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < MAX_LLOYD_ITERATIONS {
        iterations += 1;

        // update
        let mut sums = vec![0.0; c];
        let mut counts = vec![0usize; c];
        for (v, &a) in values.iter().zip(&assignment) {
            sums[a] += v;
            counts[a] += 1;
        }
        for t in 0..c {
            if counts[t] > 0 {
                centroids[t] = sums[t] / counts[t] as f64;
            }
        }
        // empty clusters take the point farthest from its centroid
        for t in 0..c {
            if counts[t] == 0 {
                let (far, _) = values
                    .iter()
                    .zip(&assignment)
                    .enumerate()
                    .filter(|(_, (_, &a))| counts[a] > 1)
                    .map(|(idx, (v, &a))| (idx, (v - centroids[a]).abs()))
                    .fold((usize::MAX, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                let old = assignment[far];
                counts[old] -= 1;
                counts[t] = 1;
                assignment[far] = t;
                centroids[t] = values[far];
            }
        }

        // assignment
        let mut changed = 0;
        for (v, a) in values.iter().zip(assignment.iter_mut()) {
            let best = nearest(&centroids, *v);
            if best != *a {
                *a = best;
                changed += 1;
            }
        }
        sse_trace.push(sse(values, &centroids, &assignment));
        if changed == 0 {
            converged = true;
            break;
        }
    }

    centroids.sort_by(f64::total_cmp);
    Ok(KMeansFit {
        codebook: Codebook::new(centroids)?,
        sse_trace,
        iterations,
        converged,
    })
}

/// A discretized sequence `G_j^{i,k,c}` over symbols `1..=alphabet`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    pub symbols: Vec<usize>,
    pub origin: Origin,
    pub alphabet: usize,
}

pub fn encode(seq: &ProcessedSequence, codebook: &Codebook) -> SymbolSequence {
    SymbolSequence {
        symbols: seq.values.iter().map(|&v| codebook.symbol(v)).collect(),
        origin: seq.origin,
        alphabet: codebook.size(),
    }
}
