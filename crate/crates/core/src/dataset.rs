//! Corpus data model: gestures × executions of J-row sensor matrices.
//!
//! On disk a dataset is a directory holding `manifest.json` (`{"I":..,"J":..,"K":..}`)
//! and one headerless CSV per execution, `g<i>_e<k>.csv`, with J rows of
//! comma-separated decimals. All indices in filenames are 1-based.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// One execution of a gesture: `J` sensor rows of equal length `l(i,k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorMatrix {
    rows: Vec<Vec<f64>>,
}

impl SensorMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let len = rows.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = rows.iter().position(|r| r.len() != len) {
            return Err(Error::Shape(format!(
                "row {} has {} values, expected {len}",
                bad + 1,
                rows[bad].len()
            )));
        }
        if len < 2 {
            return Err(Error::Length(format!("execution length {len} < 2")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Parse {
                location: "sensor matrix".into(),
                message: "non-finite value".into(),
            });
        }
        Ok(SensorMatrix { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A labelled corpus `G^{i,k}` with `I` gestures, `J` sensors and `K` executions.
///
/// Accessors take 1-based indices, matching the file layout and reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    gestures: usize,
    sensors: usize,
    executions: usize,
    // gesture-major: (i - 1) * K + (k - 1)
    matrices: Vec<SensorMatrix>,
}

impl RawDataset {
    /// Builds a dataset from gesture-major matrices, checking every invariant.
    pub fn new(
        gestures: usize,
        sensors: usize,
        executions: usize,
        matrices: Vec<SensorMatrix>,
    ) -> Result<Self> {
        if gestures == 0 || sensors == 0 || executions == 0 {
            return Err(Error::Shape(format!(
                "counts must be positive, got I={gestures} J={sensors} K={executions}"
            )));
        }
        if matrices.len() != gestures * executions {
            return Err(Error::Shape(format!(
                "expected {} executions, got {}",
                gestures * executions,
                matrices.len()
            )));
        }
        for (idx, m) in matrices.iter().enumerate() {
            if m.rows.len() != sensors {
                return Err(Error::Shape(format!(
                    "gesture {} execution {} has {} rows, expected J={sensors}",
                    idx / executions + 1,
                    idx % executions + 1,
                    m.rows.len()
                )));
            }
        }
        Ok(RawDataset {
            gestures,
            sensors,
            executions,
            matrices,
        })
    }

    pub fn gestures(&self) -> usize {
        self.gestures
    }

    pub fn sensors(&self) -> usize {
        self.sensors
    }

    pub fn executions(&self) -> usize {
        self.executions
    }

    pub fn matrix(&self, gesture: usize, execution: usize) -> &SensorMatrix {
        assert!((1..=self.gestures).contains(&gesture), "gesture {gesture} out of range");
        assert!(
            (1..=self.executions).contains(&execution),
            "execution {execution} out of range"
        );
        &self.matrices[(gesture - 1) * self.executions + (execution - 1)]
    }

    /// Row view `G_j^{i,k}`.
    pub fn row(&self, gesture: usize, sensor: usize, execution: usize) -> &[f64] {
        &self.matrix(gesture, execution).rows[sensor - 1]
    }

    /// `l(i,k)`.
    pub fn length(&self, gesture: usize, execution: usize) -> usize {
        self.matrix(gesture, execution).len()
    }

    /// Iterates `(gesture, execution, matrix)` in gesture-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &SensorMatrix)> {
        self.matrices
            .iter()
            .enumerate()
            .map(move |(idx, m)| (idx / self.executions + 1, idx % self.executions + 1, m))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    #[serde(rename = "I")]
    gestures: usize,
    #[serde(rename = "J")]
    sensors: usize,
    #[serde(rename = "K")]
    executions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synthetic: Option<SyntheticSpec>,
}

pub fn execution_path(root: &Path, gesture: usize, execution: usize) -> PathBuf {
    root.join(format!("g{gesture}_e{execution}.csv"))
}

/// Loads a dataset directory.
pub fn load_dataset(root: &Path) -> Result<RawDataset> {
    let manifest_path = root.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;

    let mut matrices = Vec::with_capacity(manifest.gestures * manifest.executions);
    for gesture in 1..=manifest.gestures {
        for execution in 1..=manifest.executions {
            let path = execution_path(root, gesture, execution);
            if !path.is_file() {
                return Err(Error::MissingExecution {
                    gesture,
                    execution,
                    path,
                });
            }
            let rows = read_rows(&path)?;
            if rows.len() != manifest.sensors {
                return Err(Error::Shape(format!(
                    "{}: {} rows, expected J={}",
                    path.display(),
                    rows.len(),
                    manifest.sensors
                )));
            }
            let matrix = SensorMatrix::new(rows).map_err(|e| match e {
                Error::Shape(m) => Error::Shape(format!("{}: {m}", path.display())),
                Error::Length(m) => Error::Length(format!("{}: {m}", path.display())),
                other => other,
            })?;
            matrices.push(matrix);
        }
    }
    RawDataset::new(
        manifest.gestures,
        manifest.sensors,
        manifest.executions,
        matrices,
    )
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::csv(path, e))?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::csv(path, e))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        location: format!("{} row {} column {}", path.display(), r + 1, c + 1),
                        message: format!("not a finite number: {cell:?}"),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Writes `dataset` to `root` (created if needed). Values use the shortest
/// decimal form that parses back to the same `f64`.
pub fn save_dataset(dataset: &RawDataset, root: &Path) -> Result<()> {
    save_with_manifest(dataset, root, None)
}

pub(crate) fn save_with_manifest(
    dataset: &RawDataset,
    root: &Path,
    synthetic: Option<&SyntheticSpec>,
) -> Result<()> {
    fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let manifest = Manifest {
        gestures: dataset.gestures,
        sensors: dataset.sensors,
        executions: dataset.executions,
        synthetic: synthetic.cloned(),
    };
    let manifest_path = root.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|source| Error::Json {
        path: manifest_path.clone(),
        source,
    })?;
    fs::write(&manifest_path, json + "\n").map_err(|e| Error::io(&manifest_path, e))?;

    for (gesture, execution, matrix) in dataset.iter() {
        let path = execution_path(root, gesture, execution);
        let mut text = String::new();
        for row in &matrix.rows {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            text.push_str(&line.join(","));
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Recipe for a synthetic corpus standing in for recorded glove data.
///
/// Each row is a chain of half-cosine arches alternating up and down, with
/// exactly `target_cp[i][j]` interior extrema before noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    #[serde(rename = "I")]
    pub gestures: usize,
    #[serde(rename = "J")]
    pub sensors: usize,
    #[serde(rename = "K")]
    pub executions: usize,
    /// Interior extrema per `[gesture][sensor]` (0-based vectors).
    pub target_cp: Vec<Vec<usize>>,
    /// Inclusive `[min, max]` execution length in samples.
    pub length_range: [usize; 2],
    /// Half-width of the additive uniform noise.
    pub noise_amplitude: f64,
    /// Optional per-sensor override of `noise_amplitude`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensor_noise: Option<Vec<f64>>,
    pub rng_seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gestures == 0 || self.sensors == 0 || self.executions == 0 {
            return Err(Error::Spec("I, J and K must be positive".into()));
        }
        let [min_len, max_len] = self.length_range;
        if min_len < 2 || min_len > max_len {
            return Err(Error::Spec(format!(
                "length_range [{min_len}, {max_len}] must satisfy 2 <= min <= max"
            )));
        }
        if self.target_cp.len() != self.gestures
            || self.target_cp.iter().any(|r| r.len() != self.sensors)
        {
            return Err(Error::Spec(format!(
                "target_cp must be an I x J = {} x {} table",
                self.gestures, self.sensors
            )));
        }
        if let Some(&worst) = self.target_cp.iter().flatten().max() {
            // each of the worst + 1 monotone segments needs at least one step
            if worst + 2 > min_len {
                return Err(Error::Spec(format!(
                    "target_cp {worst} needs length >= {}, min length is {min_len}",
                    worst + 2
                )));
            }
        }
        let noise_ok = |a: f64| a.is_finite() && a >= 0.0;
        if !noise_ok(self.noise_amplitude) {
            return Err(Error::Spec("noise_amplitude must be finite and >= 0".into()));
        }
        if let Some(per_sensor) = &self.sensor_noise {
            if per_sensor.len() != self.sensors || !per_sensor.iter().all(|&a| noise_ok(a)) {
                return Err(Error::Spec(
                    "sensor_noise must hold J finite values >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    fn noise_for(&self, sensor: usize) -> f64 {
        self.sensor_noise
            .as_ref()
            .map_or(self.noise_amplitude, |n| n[sensor - 1])
    }
}

/// Shape of one (gesture, sensor) signal, shared by all executions.
struct ArchTemplate {
    // relative widths of the target + 1 monotone segments
    widths: Vec<f64>,
    // magnitudes of the target + 2 extremum levels (endpoints included)
    levels: Vec<f64>,
    rising_first: bool,
}

impl ArchTemplate {
    fn draw(extrema: usize, rng: &mut impl Rng) -> Self {
        ArchTemplate {
            widths: (0..=extrema).map(|_| rng.random_range(0.6..1.4)).collect(),
            levels: (0..extrema + 2).map(|_| rng.random_range(0.5..1.5)).collect(),
            rising_first: rng.random_bool(0.5),
        }
    }

    /// Renders one execution of length `len` with small per-execution jitter.
    fn render(&self, len: usize, rng: &mut impl Rng) -> Vec<f64> {
        let segments = self.widths.len();
        let widths: Vec<f64> = self
            .widths
            .iter()
            .map(|w| w * rng.random_range(0.85..1.15))
            .collect();
        let total: f64 = widths.iter().sum();
        let span = (len - 1) as f64;

        // integer knot positions, strictly increasing, first 0 and last len - 1
        let mut knots = Vec::with_capacity(segments + 1);
        let mut acc = 0.0;
        knots.push(0usize);
        for w in &widths[..segments - 1] {
            acc += w;
            knots.push((acc / total * span).round() as usize);
        }
        knots.push(len - 1);
        for s in 1..segments {
            knots[s] = knots[s].max(knots[s - 1] + 1);
        }
        for s in (1..segments).rev() {
            knots[s] = knots[s].min(knots[s + 1] - 1);
        }

        // levels alternate in sign so every interior knot is a strict extremum
        let levels: Vec<f64> = self
            .levels
            .iter()
            .enumerate()
            .map(|(s, mag)| {
                let low_first = self.rising_first;
                let low = (s % 2 == 0) == low_first;
                let mag = mag * rng.random_range(0.9..1.1);
                if low {
                    -mag
                } else {
                    mag
                }
            })
            .collect();

        let mut out = vec![0.0; len];
        for s in 0..segments {
            let (a, b) = (knots[s], knots[s + 1]);
            let (from, to) = (levels[s], levels[s + 1]);
            for (m, slot) in out.iter_mut().enumerate().take(b + 1).skip(a) {
                let u = (m - a) as f64 / (b - a) as f64;
                let ease = (1.0 - (std::f64::consts::PI * u).cos()) / 2.0;
                *slot = from + (to - from) * ease;
            }
        }
        out
    }
}

/// Generates a synthetic corpus. Identical specs yield bit-identical datasets.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<RawDataset> {
    spec.validate()?;
    let [min_len, max_len] = spec.length_range;
    let templates: Vec<Vec<ArchTemplate>> = (1..=spec.gestures)
        .map(|i| {
            (1..=spec.sensors)
                .map(|j| {
                    let mut rng = seed::rng(seed::derive(spec.rng_seed, &[0, i as u64, j as u64]));
                    ArchTemplate::draw(spec.target_cp[i - 1][j - 1], &mut rng)
                })
                .collect()
        })
        .collect();

    let mut matrices = Vec::with_capacity(spec.gestures * spec.executions);
    for i in 1..=spec.gestures {
        for k in 1..=spec.executions {
            let mut len_rng = seed::rng(seed::derive(spec.rng_seed, &[1, i as u64, k as u64]));
            let len = len_rng.random_range(min_len..=max_len);
            let rows = (1..=spec.sensors)
                .map(|j| {
                    let mut rng = seed::rng(seed::derive(
                        spec.rng_seed,
                        &[2, i as u64, j as u64, k as u64],
                    ));
                    let mut row = templates[i - 1][j - 1].render(len, &mut rng);
                    let noise = spec.noise_for(j);
                    if noise > 0.0 {
                        for v in &mut row {
                            *v += rng.random_range(-noise..=noise);
                        }
                    }
                    row
                })
                .collect();
            matrices.push(SensorMatrix::new(rows)?);
        }
    }
    RawDataset::new(spec.gestures, spec.sensors, spec.executions, matrices)
}

/// Generates `spec` and writes it to `root`, echoing the spec into the manifest.
pub fn generate_to_dir(spec: &SyntheticSpec, root: &Path) -> Result<RawDataset> {
    let dataset = generate_synthetic(spec)?;
    save_with_manifest(&dataset, root, Some(spec))?;
    Ok(dataset)
}
