//! Discrete hidden Markov models: likelihood, Baum-Welch training and
//! maximum-likelihood classification.
//!
//! Symbols are 1-based everywhere in the public API (`1..=alphabet`), the
//! same convention as [`SymbolSequence`](crate::quantize::SymbolSequence).
//! The model is fully connected (ergodic).

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantize::SymbolSequence;
use crate::seed;

const STOCHASTIC_TOL: f64 = 1e-9;

/// `λ = (T, b, E)` over `n` hidden states and an alphabet of `k` symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct Hmm {
    initial: Array1<f64>,
    transition: Array2<f64>,
    emission: Array2<f64>,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Param(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::Param(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl Hmm {
    /// Builds a model, checking shapes and that `b` and every row of `T` and
    /// `E` are probability distributions (within 1e-9).
    pub fn new(initial: Array1<f64>, transition: Array2<f64>, emission: Array2<f64>) -> Result<Self> {
        let n = initial.len();
        if n == 0 {
            return Err(Error::Param("a model needs at least one state".into()));
        }
        if transition.dim() != (n, n) {
            return Err(Error::Param(format!(
                "transition matrix is {:?}, expected {n}x{n}",
                transition.dim()
            )));
        }
        if emission.nrows() != n || emission.ncols() == 0 {
            return Err(Error::Param(format!(
                "emission matrix is {:?}, expected {n} rows",
                emission.dim()
            )));
        }
        check_distribution("initial vector", &initial.to_vec())?;
        for (i, row) in transition.rows().into_iter().enumerate() {
            check_distribution(&format!("transition row {}", i + 1), &row.to_vec())?;
        }
        for (i, row) in emission.rows().into_iter().enumerate() {
            check_distribution(&format!("emission row {}", i + 1), &row.to_vec())?;
        }
        Ok(Hmm {
            initial: initial.as_standard_layout().to_owned(),
            transition: transition.as_standard_layout().to_owned(),
            emission: emission.as_standard_layout().to_owned(),
        })
    }

    /// Random model whose rows are independent uniform variates normalized
    /// to sum to one. Deterministic per seed.
    pub fn init_random(states: usize, alphabet: usize, seed: u64) -> Result<Self> {
        if states == 0 {
            return Err(Error::Param("state count must be >= 1".into()));
        }
        if alphabet < 2 {
            return Err(Error::Param(format!("alphabet size must be >= 2, got {alphabet}")));
        }
        let mut rng = seed::rng(seed);
        let mut row = |len: usize| -> Vec<f64> {
            // (0, 1], so no entry is exactly zero
            let raw: Vec<f64> = (0..len).map(|_| 1.0 - rng.random::<f64>()).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect()
        };
        let initial = Array1::from(row(states));
        let transition = Array2::from_shape_vec(
            (states, states),
            (0..states).flat_map(|_| row(states)).collect(),
        )
        .expect("shape");
        let emission = Array2::from_shape_vec(
            (states, alphabet),
            (0..states).flat_map(|_| row(alphabet)).collect(),
        )
        .expect("shape");
        Hmm::new(initial, transition, emission)
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    pub fn alphabet(&self) -> usize {
        self.emission.ncols()
    }

    pub fn initial(&self) -> &Array1<f64> {
        &self.initial
    }

    pub fn transition(&self) -> &Array2<f64> {
        &self.transition
    }

    pub fn emission(&self) -> &Array2<f64> {
        &self.emission
    }

    /// `log p(O | λ)` in nats; see [`forward_log_likelihood`].
    pub fn log_likelihood(&self, symbols: &[usize]) -> Result<f64> {
        forward_log_likelihood(self, symbols)
    }

    /// Draws a symbol sequence of length `len`.
    pub fn sample(&self, len: usize, rng: &mut impl Rng) -> Vec<usize> {
        fn draw(probs: impl Iterator<Item = f64>, rng: &mut impl Rng) -> usize {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut last = 0;
            for (idx, p) in probs.enumerate() {
                acc += p;
                last = idx;
                if u < acc {
                    return idx;
                }
            }
            last
        }
        let mut out = Vec::with_capacity(len);
        if len == 0 {
            return out;
        }
        let mut state = draw(self.initial.iter().copied(), rng);
        for t in 0..len {
            if t > 0 {
                state = draw(self.transition.row(state).iter().copied(), rng);
            }
            out.push(draw(self.emission.row(state).iter().copied(), rng) + 1);
        }
        out
    }

    /// Text form: a header line `n k`, then `b`, then the `n` rows of `T`,
    /// then the `n` rows of `E`; whitespace-separated shortest round-trip decimals.
    pub fn to_text(&self) -> String {
        let line = |v: &mut dyn Iterator<Item = &f64>| -> String {
            v.map(|p| p.to_string()).collect::<Vec<_>>().join(" ") + "\n"
        };
        let mut out = format!("{} {}\n", self.states(), self.alphabet());
        out += &line(&mut self.initial.iter());
        for row in self.transition.rows() {
            out += &line(&mut row.iter());
        }
        for row in self.emission.rows() {
            out += &line(&mut row.iter());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Param(format!("model text: {m}"));
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut numbers = |expected: usize| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| bad("unexpected end of input".into()))?;
            let values = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != expected {
                return Err(bad(format!("expected {expected} values, got {}", values.len())));
            }
            Ok(values)
        };
        let header = numbers(2)?;
        let (n, k) = (header[0] as usize, header[1] as usize);
        if header[0] != n as f64 || header[1] != k as f64 || n == 0 || k == 0 {
            return Err(bad(format!("invalid header {header:?}")));
        }
        let initial = Array1::from(numbers(n)?);
        let mut t = Vec::with_capacity(n * n);
        for _ in 0..n {
            t.extend(numbers(n)?);
        }
        let mut e = Vec::with_capacity(n * k);
        for _ in 0..n {
            e.extend(numbers(k)?);
        }
        if lines.next().is_some() {
            return Err(bad("trailing content".into()));
        }
        Hmm::new(
            initial,
            Array2::from_shape_vec((n, n), t).expect("shape"),
            Array2::from_shape_vec((n, k), e).expect("shape"),
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Hmm::from_text(&text).map_err(|e| Error::ModelLoad {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn check_symbols(symbols: &[usize], alphabet: usize) -> Result<()> {
    match symbols.iter().find(|&&s| s == 0 || s > alphabet) {
        Some(&symbol) => Err(Error::SymbolOutOfRange { symbol, alphabet }),
        None => Ok(()),
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log p(O | λ)` by the forward recursion in log space.
///
/// Returns `-inf` when the sequence is impossible under the model. An empty
/// sequence has log-likelihood 0.
pub fn forward_log_likelihood(model: &Hmm, symbols: &[usize]) -> Result<f64> {
    check_symbols(symbols, model.alphabet())?;
    let Some((&first, rest)) = symbols.split_first() else {
        return Ok(0.0);
    };
    let n = model.states();
    let log_t = model.transition.mapv(f64::ln);
    let log_e = model.emission.mapv(f64::ln);

    let mut alpha: Vec<f64> = (0..n)
        .map(|i| model.initial[i].ln() + log_e[[i, first - 1]])
        .collect();
    let mut next = vec![0.0; n];
    for &o in rest {
        for (j, slot) in next.iter_mut().enumerate() {
            *slot = log_sum_exp((0..n).map(|i| alpha[i] + log_t[[i, j]])) + log_e[[j, o - 1]];
        }
        std::mem::swap(&mut alpha, &mut next);
    }
    Ok(log_sum_exp(alpha.iter().copied()))
}

/// Baum-Welch settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_iter: usize,
    /// Stop when the relative gain in total log-likelihood falls below this.
    pub rel_tol: f64,
    /// Independent random initializations; the best final likelihood wins.
    pub restarts: usize,
    pub seed: u64,
    /// Lower bound on every trained probability.
    pub prob_floor: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_iter: 200,
            rel_tol: 1e-6,
            restarts: 3,
            seed: 0,
            prob_floor: 1e-10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Param("max_iter must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Param("restarts must be >= 1".into()));
        }
        if !(self.rel_tol.is_finite() && self.rel_tol >= 0.0) {
            return Err(Error::Param("rel_tol must be finite and >= 0".into()));
        }
        if !(self.prob_floor.is_finite() && (0.0..1e-3).contains(&self.prob_floor)) {
            return Err(Error::Param("prob_floor must lie in [0, 1e-3)".into()));
        }
        Ok(())
    }
}

/// Diagnostics of a Baum-Welch run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Iterations of the winning restart.
    pub iterations: usize,
    /// Total log-likelihood of the winning restart's model at each iteration.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
    pub restarts_used: usize,
    pub best_restart: usize,
    /// Final total log-likelihood of every restart.
    pub restart_logliks: Vec<f64>,
}

impl TrainReport {
    pub fn final_loglik(&self) -> f64 {
        self.loglik_trace.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Maximizer of `Σ w_i log p_i` subject to `Σ p_i = 1` and `p_i >= floor`:
/// entries whose share falls below the floor are pinned to it and the rest
/// rescaled. Falls back to `fallback` when all weights are zero.
fn floored_distribution(weights: &[f64], floor: f64, fallback: &[f64]) -> Vec<f64> {
    let total: f64 = weights.iter().sum();
    // negated so NaN also takes this branch
    if !(total > 0.0) {
        return floored_distribution(fallback, floor, &vec![1.0; fallback.len()]);
    }
    let mut pinned = vec![false; weights.len()];
    loop {
        let free_weight: f64 = weights
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(w, _)| w)
            .sum();
        let pinned_count = pinned.iter().filter(|&&p| p).count();
        let free_mass = 1.0 - pinned_count as f64 * floor;
        let mut changed = false;
        for (w, p) in weights.iter().zip(pinned.iter_mut()) {
            if !*p && w * free_mass < floor * free_weight {
                *p = true;
                changed = true;
            }
        }
        if !changed {
            return weights
                .iter()
                .zip(&pinned)
                .map(|(w, &p)| if p { floor } else { w * free_mass / free_weight })
                .collect();
        }
    }
}

/// Row-major working copy of the parameters.
#[derive(Clone)]
struct Params {
    n: usize,
    k: usize,
    initial: Vec<f64>,
    transition: Vec<f64>,
    emission: Vec<f64>,
}

impl Params {
    fn from_model(m: &Hmm) -> Self {
        Params {
            n: m.states(),
            k: m.alphabet(),
            initial: m.initial.to_vec(),
            transition: m.transition.iter().copied().collect(),
            emission: m.emission.iter().copied().collect(),
        }
    }

    fn into_model(self) -> Result<Hmm> {
        Hmm::new(
            Array1::from(self.initial),
            Array2::from_shape_vec((self.n, self.n), self.transition).expect("shape"),
            Array2::from_shape_vec((self.n, self.k), self.emission).expect("shape"),
        )
    }

    /// Projects every distribution onto the floored simplex.
    fn apply_floor(&mut self, floor: f64) {
        let (n, k) = (self.n, self.k);
        self.initial = floored_distribution(&self.initial, floor, &vec![1.0; n]);
        for i in 0..n {
            let row = floored_distribution(&self.transition[i * n..(i + 1) * n], floor, &vec![1.0; n]);
            self.transition[i * n..(i + 1) * n].copy_from_slice(&row);
            let row = floored_distribution(&self.emission[i * k..(i + 1) * k], floor, &vec![1.0; k]);
            self.emission[i * k..(i + 1) * k].copy_from_slice(&row);
        }
    }
}

/// Expected counts accumulated over a corpus in one E-step.
struct Counts {
    initial: Vec<f64>,
    transition: Vec<f64>,
    emission: Vec<f64>,
    loglik: f64,
}

/// Scaled forward-backward over one sequence (0-based symbols), adding its
/// expected counts to `acc`. Returns the sequence log-likelihood.
fn accumulate(p: &Params, obs: &[usize], acc: &mut Counts, alpha: &mut Vec<f64>, beta: &mut Vec<f64>) -> f64 {
    let (n, k) = (p.n, p.k);
    let len = obs.len();
    if len == 0 {
        return 0.0;
    }
    alpha.clear();
    alpha.resize(len * n, 0.0);
    beta.clear();
    beta.resize(len * n, 0.0);
    let mut scale = vec![0.0; len];
    let emit = |i: usize, o: usize| p.emission[i * k + o];

    for i in 0..n {
        alpha[i] = p.initial[i] * emit(i, obs[0]);
    }
    for t in 0..len {
        if t > 0 {
            let (prev, cur) = alpha.split_at_mut(t * n);
            let prev = &prev[(t - 1) * n..];
            for j in 0..n {
                let mut s = 0.0;
                for i in 0..n {
                    s += prev[i] * p.transition[i * n + j];
                }
                cur[j] = s * emit(j, obs[t]);
            }
        }
        let c: f64 = alpha[t * n..(t + 1) * n].iter().sum();
        if !(c > 0.0) {
            return f64::NEG_INFINITY;
        }
        scale[t] = c;
        for a in &mut alpha[t * n..(t + 1) * n] {
            *a /= c;
        }
    }

    for b in &mut beta[(len - 1) * n..] {
        *b = 1.0;
    }
    for t in (0..len - 1).rev() {
        let o = obs[t + 1];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += p.transition[i * n + j] * emit(j, o) * beta[(t + 1) * n + j];
            }
            beta[t * n + i] = s / scale[t + 1];
        }
    }

    for i in 0..n {
        acc.initial[i] += alpha[i] * beta[i];
    }
    for t in 0..len {
        let o = obs[t];
        for i in 0..n {
            acc.emission[i * k + o] += alpha[t * n + i] * beta[t * n + i];
        }
        if t + 1 < len {
            let o_next = obs[t + 1];
            let c = scale[t + 1];
            for i in 0..n {
                let a = alpha[t * n + i] / c;
                for j in 0..n {
                    acc.transition[i * n + j] +=
                        a * p.transition[i * n + j] * emit(j, o_next) * beta[(t + 1) * n + j];
                }
            }
        }
    }
    scale.iter().map(|c| c.ln()).sum()
}

/// One E-step over the corpus.
fn expected_counts(p: &Params, corpus: &[Vec<usize>]) -> Counts {
    let mut acc = Counts {
        initial: vec![0.0; p.n],
        transition: vec![0.0; p.n * p.n],
        emission: vec![0.0; p.n * p.k],
        loglik: 0.0,
    };
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    for obs in corpus {
        acc.loglik += accumulate(p, obs, &mut acc, &mut alpha, &mut beta);
    }
    acc
}

/// M-step: floored maximizer of the expected complete-data log-likelihood.
fn maximize(p: &Params, counts: &Counts, floor: f64) -> Params {
    let (n, k) = (p.n, p.k);
    let mut next = p.clone();
    next.initial = floored_distribution(&counts.initial, floor, &p.initial);
    for i in 0..n {
        let row = floored_distribution(
            &counts.transition[i * n..(i + 1) * n],
            floor,
            &p.transition[i * n..(i + 1) * n],
        );
        next.transition[i * n..(i + 1) * n].copy_from_slice(&row);
        let row = floored_distribution(
            &counts.emission[i * k..(i + 1) * k],
            floor,
            &p.emission[i * k..(i + 1) * k],
        );
        next.emission[i * k..(i + 1) * k].copy_from_slice(&row);
    }
    next
}

struct RestartOutcome {
    params: Params,
    trace: Vec<f64>,
    converged: bool,
}

fn train_from(mut params: Params, corpus: &[Vec<usize>], config: &TrainConfig) -> Result<RestartOutcome> {
    params.apply_floor(config.prob_floor);
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    for _ in 0..config.max_iter {
        let counts = expected_counts(&params, corpus);
        let ll = counts.loglik;
        if !ll.is_finite() {
            return Err(Error::Param(format!("training log-likelihood became {ll}")));
        }
        if let Some(&prev) = trace.last() {
            let gain = (ll - prev) / prev.abs().max(f64::MIN_POSITIVE);
            if gain < config.rel_tol {
                trace.push(ll);
                converged = true;
                break;
            }
        }
        trace.push(ll);
        params = maximize(&params, &counts, config.prob_floor);
    }
    if !converged {
        // score the last update so the trace ends on the returned model
        let ll = expected_counts(&params, corpus).loglik;
        if !ll.is_finite() {
            return Err(Error::Param(format!("training log-likelihood became {ll}")));
        }
        trace.push(ll);
    }
    Ok(RestartOutcome {
        params,
        trace,
        converged,
    })
}

/// Trains an `states`-state model on several sequences at once.
///
/// Runs `config.restarts` independent random initializations (seeds derived
/// from `config.seed`) and keeps the model with the highest final total
/// log-likelihood; ties keep the earliest restart.
pub fn baum_welch<S: AsRef<[usize]>>(
    sequences: &[S],
    states: usize,
    alphabet: usize,
    config: &TrainConfig,
) -> Result<(Hmm, TrainReport)> {
    config.validate()?;
    if states == 0 || alphabet < 2 {
        return Err(Error::Param(format!(
            "need states >= 1 and alphabet >= 2, got {states} and {alphabet}"
        )));
    }
    if sequences.is_empty() || sequences.iter().all(|s| s.as_ref().is_empty()) {
        return Err(Error::EmptyTrainingSet);
    }
    let mut corpus = Vec::with_capacity(sequences.len());
    for s in sequences {
        let s = s.as_ref();
        check_symbols(s, alphabet)?;
        corpus.push(s.iter().map(|&o| o - 1).collect::<Vec<usize>>());
    }

    let mut best: Option<(usize, RestartOutcome)> = None;
    let mut restart_logliks = Vec::with_capacity(config.restarts);
    for r in 0..config.restarts {
        let init = Hmm::init_random(states, alphabet, seed::derive(config.seed, &[r as u64]))?;
        let outcome = train_from(Params::from_model(&init), &corpus, config)?;
        let ll = *outcome.trace.last().expect("non-empty trace");
        restart_logliks.push(ll);
        let better = match &best {
            None => true,
            Some((_, b)) => ll > *b.trace.last().expect("non-empty trace"),
        };
        if better {
            best = Some((r, outcome));
        }
    }
    let (best_restart, outcome) = best.expect("restarts >= 1");
    let report = TrainReport {
        iterations: outcome.trace.len() - 1,
        loglik_trace: outcome.trace,
        converged: outcome.converged,
        restarts_used: config.restarts,
        best_restart,
        restart_logliks,
    };
    Ok((outcome.params.into_model()?, report))
}

/// Runs Baum-Welch from a given model instead of random restarts.
pub fn baum_welch_from<S: AsRef<[usize]>>(
    init: &Hmm,
    sequences: &[S],
    config: &TrainConfig,
) -> Result<(Hmm, TrainReport)> {
    config.validate()?;
    if sequences.is_empty() || sequences.iter().all(|s| s.as_ref().is_empty()) {
        return Err(Error::EmptyTrainingSet);
    }
    let corpus = sequences
        .iter()
        .map(|s| {
            let s = s.as_ref();
            check_symbols(s, init.alphabet()).map(|_| s.iter().map(|&o| o - 1).collect())
        })
        .collect::<Result<Vec<Vec<usize>>>>()?;
    let outcome = train_from(Params::from_model(init), &corpus, config)?;
    let ll = *outcome.trace.last().expect("non-empty trace");
    let report = TrainReport {
        iterations: outcome.trace.len() - 1,
        loglik_trace: outcome.trace,
        converged: outcome.converged,
        restarts_used: 1,
        best_restart: 0,
        restart_logliks: vec![ll],
    };
    Ok((outcome.params.into_model()?, report))
}

impl AsRef<[usize]> for SymbolSequence {
    fn as_ref(&self) -> &[usize] {
        &self.symbols
    }
}

/// Log-likelihood of `symbols` under every model, in label order.
pub fn score_models(models: &BTreeMap<String, Hmm>, symbols: &[usize]) -> Result<Vec<(String, f64)>> {
    let mut iter = models.values();
    let first = iter.next().ok_or(Error::EmptyModelSet)?;
    let alphabet = first.alphabet();
    if let Some(other) = iter.find(|m| m.alphabet() != alphabet) {
        return Err(Error::AlphabetMismatch {
            expected: alphabet,
            found: other.alphabet(),
        });
    }
    if let Some(&s) = symbols.iter().find(|&&s| s == 0 || s > alphabet) {
        return Err(Error::AlphabetMismatch {
            expected: alphabet,
            found: s,
        });
    }
    models
        .iter()
        .map(|(label, m)| forward_log_likelihood(m, symbols).map(|ll| (label.clone(), ll)))
        .collect()
}

/// Label of the most likely model; ties go to the lowest label.
pub fn classify(models: &BTreeMap<String, Hmm>, symbols: &[usize]) -> Result<String> {
    let scores = score_models(models, symbols)?;
    Ok(argmax_label(&scores).to_string())
}

/// First label with the highest score. `scores` must be non-empty.
pub fn argmax_label(scores: &[(String, f64)]) -> &str {
    let mut best = &scores[0];
    for s in &scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    &best.0
}
