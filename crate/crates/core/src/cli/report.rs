//! CSV report writers. Floats use the shortest decimal that round-trips.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::critpoints::{CpStats, PredictorVariant};
use crate::error::{Error, Result};
use crate::modelselect::{order_free_mean, SweepResult, XiRecord, XiRow};
use crate::preprocess::Origin;

fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(header).map_err(|e| Error::csv(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(path.to_path_buf())
}

fn strings<const N: usize>(items: [&str; N]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub const RECORDS_HEADER: [&str; 10] = [
    "gesture",
    "sensor",
    "clusters",
    "variant",
    "predicted_n",
    "argmin_n",
    "aic_min",
    "aic_max",
    "aic_cp",
    "xi",
];

pub fn write_records(path: &Path, records: &[XiRecord]) -> Result<PathBuf> {
    write_csv(
        path,
        &strings(RECORDS_HEADER),
        records.iter().map(|r| {
            vec![
                r.id.gesture.to_string(),
                r.id.sensor.to_string(),
                r.id.clusters.to_string(),
                r.variant.to_string(),
                r.predicted_n.to_string(),
                r.argmin_n.to_string(),
                r.aic_min.to_string(),
                r.aic_max.to_string(),
                r.aic_cp.to_string(),
                r.xi.to_string(),
            ]
        }),
    )
}

pub fn write_sweeps(path: &Path, sweeps: &[SweepResult]) -> Result<PathBuf> {
    write_csv(
        path,
        &strings(["gesture", "sensor", "clusters", "states", "aic"]),
        sweeps.iter().flat_map(|s| {
            s.aic_by_n.iter().map(move |(n, a)| {
                vec![
                    s.id.gesture.to_string(),
                    s.id.sensor.to_string(),
                    s.id.clusters.to_string(),
                    n.to_string(),
                    a.to_string(),
                ]
            })
        }),
    )
}

/// Table with one row per sensor range (Experiment A) or per (c, range)
/// group (Experiment B) and one column per predictor variant.
pub fn write_xi_table(path: &Path, rows: &[XiRow], with_clusters: bool) -> Result<PathBuf> {
    let variants: Vec<PredictorVariant> = rows
        .first()
        .map(|r| r.cells.iter().map(|(v, _)| *v).collect())
        .unwrap_or_default();
    let mut header = if with_clusters {
        strings(["group", "range", "clusters"])
    } else {
        strings(["range"])
    };
    header.extend(variants.iter().map(|v| v.to_string()));
    write_csv(
        path,
        &header,
        rows.iter().map(|r| {
            let mut out = if with_clusters {
                vec![
                    r.label.clone(),
                    r.range.clone(),
                    r.clusters.map(|c| c.to_string()).unwrap_or_default(),
                ]
            } else {
                vec![r.label.clone()]
            };
            out.extend(r.cells.iter().map(|(_, x)| x.to_string()));
            out
        }),
    )
}

/// Per-gesture or per-sensor ξ with a column per variant and their mean.
pub fn write_xi_groups(
    path: &Path,
    key: &str,
    variants: &[PredictorVariant],
    groups: &[(usize, Vec<f64>, f64)],
) -> Result<PathBuf> {
    let mut header = vec![key.to_string()];
    header.extend(variants.iter().map(|v| v.to_string()));
    header.push("all_variants".into());
    write_csv(
        path,
        &header,
        groups.iter().map(|(g, per_variant, all)| {
            let mut row = vec![g.to_string()];
            row.extend(per_variant.iter().map(|x| x.to_string()));
            row.push(all.to_string());
            row
        }),
    )
}

pub fn write_excluded(path: &Path, excluded: &[Origin]) -> Result<PathBuf> {
    write_csv(
        path,
        &strings(["gesture", "sensor", "execution"]),
        excluded.iter().map(|o| {
            vec![
                o.gesture.to_string(),
                o.sensor.to_string(),
                o.execution.to_string(),
            ]
        }),
    )
}

/// Average critical-point count per gesture and per sensor, over every
/// surviving sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct CpTables {
    pub by_gesture: Vec<(usize, f64)>,
    pub by_sensor: Vec<(usize, f64)>,
}

impl CpTables {
    pub fn from_stats(stats: &CpStats) -> Result<Self> {
        let mut by_gesture: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        let mut by_sensor: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (o, c) in &stats.counts {
            by_gesture.entry(o.gesture).or_default().push(c.total as f64);
            by_sensor.entry(o.sensor).or_default().push(c.total as f64);
        }
        let avg = |m: BTreeMap<usize, Vec<f64>>| -> Result<Vec<(usize, f64)>> {
            m.into_iter()
                .map(|(k, v)| order_free_mean(v).map(|a| (k, a)))
                .collect()
        };
        Ok(CpTables {
            by_gesture: avg(by_gesture)?,
            by_sensor: avg(by_sensor)?,
        })
    }
}

pub fn write_cp_tables(dir: &Path, tables: &CpTables, stats: &CpStats) -> Result<Vec<PathBuf>> {
    let pairs = |v: &[(usize, f64)]| -> Vec<Vec<String>> {
        v.iter().map(|(k, a)| vec![k.to_string(), a.to_string()]).collect()
    };
    Ok(vec![
        write_csv(
            &dir.join("cp_by_gesture.csv"),
            &strings(["gesture", "avg_cp"]),
            pairs(&tables.by_gesture),
        )?,
        write_csv(
            &dir.join("cp_by_sensor.csv"),
            &strings(["sensor", "avg_cp"]),
            pairs(&tables.by_sensor),
        )?,
        write_csv(
            &dir.join("cp_medians.csv"),
            &strings(["gesture", "sensor", "median_cp"]),
            stats
                .medians
                .iter()
                .map(|((g, s), m)| vec![g.to_string(), s.to_string(), m.to_string()]),
        )?,
    ])
}

/// Reads back a records file written by [`write_records`].
pub fn read_records(path: &Path) -> Result<Vec<XiRecord>> {
    use crate::modelselect::PairId;
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let parse_err = |row: usize, what: &str| Error::Parse {
        location: format!("{} row {row}", path.display()),
        message: format!("bad {what}"),
    };
    let mut out = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let u = |c: usize| rec.get(c).and_then(|s| s.parse::<usize>().ok()).ok_or_else(|| parse_err(idx + 1, RECORDS_HEADER[c]));
        let f = |c: usize| rec.get(c).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| parse_err(idx + 1, RECORDS_HEADER[c]));
        out.push(XiRecord {
            id: PairId {
                gesture: u(0)?,
                sensor: u(1)?,
                clusters: u(2)?,
            },
            variant: rec.get(3).unwrap_or_default().parse()?,
            predicted_n: u(4)?,
            argmin_n: u(5)?,
            aic_min: f(6)?,
            aic_max: f(7)?,
            aic_cp: f(8)?,
            xi: f(9)?,
        });
    }
    Ok(out)
}
