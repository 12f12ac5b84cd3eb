//! CSV persistence. Every file starts with a header row; the schema version
//! of all tables is recorded in the experiment's `manifest.json`.
//!
//! Floats are written in shortest round-trip form, so reloading a table gives
//! back bit-identical values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use csv::StringRecord;
use serde::Serialize;

use super::experiments::{Failure, ParetoPoint, SensitivityRow, SweepCell, SweepRun, UniformPoint};
use crate::error::{Error, Result};
use crate::eval::BoxStats;
use crate::faultmem::NoiseVector;
use crate::lanmax::TrainReport;

pub const SCHEMA_VERSION: u32 = 1;

/// Writes `bytes` next to `path` and renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_table<I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Shape(format!(
                "{}: row has {} fields, header has {}",
                path.display(),
                row.len(),
                header.len()
            )));
        }
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

pub fn f64_cell(v: f64) -> String {
    v.to_string()
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

fn header(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

/// Column lookup over a loaded table.
pub struct Table {
    pub path: String,
    pub headers: StringRecord,
    pub rows: Vec<StringRecord>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let headers = r.headers()?.clone();
        let rows = r.records().collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Table {
            path: path.display().to_string(),
            headers,
            rows,
        })
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: missing column {name}", self.path)))
    }

    pub fn count_prefixed(&self, prefix: &str) -> usize {
        (1..).take_while(|i| self.headers.iter().any(|h| h == format!("{prefix}_{i}"))).count()
    }

    pub fn str<'a>(&self, row: &'a StringRecord, name: &str) -> Result<&'a str> {
        let i = self.index(name)?;
        row.get(i)
            .ok_or_else(|| Error::Config(format!("{}: short row for column {name}", self.path)))
    }

    pub fn parse<T: std::str::FromStr>(&self, row: &StringRecord, name: &str) -> Result<T> {
        let s = self.str(row, name)?;
        s.parse()
            .map_err(|_| Error::Config(format!("{}: bad value {s:?} in column {name}", self.path)))
    }
}

pub fn pareto_header(layers: usize) -> Vec<String> {
    let mut h = header(&["alpha", "seed"]);
    h.extend(numbered("p", layers));
    h.extend(header(&["E_norm", "acc_mean", "acc_halfwidth", "trials"]));
    h
}

pub fn write_pareto(path: &Path, points: &[ParetoPoint], layers: usize) -> Result<()> {
    let rows = points.iter().map(|pt| {
        let mut r = vec![f64_cell(pt.alpha), pt.seed.to_string()];
        r.extend(pt.noise.values().into_iter().map(f64_cell));
        r.extend([f64_cell(pt.energy), f64_cell(pt.acc_mean), f64_cell(pt.acc_halfwidth), pt.trials.to_string()]);
        r
    });
    write_table(path, &pareto_header(layers), rows)
}

pub fn read_pareto(path: &Path) -> Result<Vec<ParetoPoint>> {
    let t = Table::read(path)?;
    let layers = t.count_prefixed("p");
    t.rows
        .iter()
        .map(|row| {
            let p = (1..=layers)
                .map(|i| t.parse::<f64>(row, &format!("p_{i}")))
                .collect::<Result<Vec<_>>>()?;
            Ok(ParetoPoint {
                alpha: t.parse(row, "alpha")?,
                seed: t.parse(row, "seed")?,
                noise: NoiseVector::from_values(&p)?,
                energy: t.parse(row, "E_norm")?,
                acc_mean: t.parse(row, "acc_mean")?,
                acc_halfwidth: t.parse(row, "acc_halfwidth")?,
                trials: t.parse(row, "trials")?,
            })
        })
        .collect()
}

pub fn write_uniform(path: &Path, points: &[UniformPoint]) -> Result<()> {
    let rows = points.iter().map(|u| {
        vec![
            f64_cell(u.p),
            u.seed.to_string(),
            f64_cell(u.energy),
            f64_cell(u.acc_mean),
            f64_cell(u.acc_halfwidth),
            u.trials.to_string(),
        ]
    });
    write_table(
        path,
        &header(&["p_uniform", "seed", "E_norm", "acc_mean", "acc_halfwidth", "trials"]),
        rows,
    )
}

pub fn read_uniform(path: &Path) -> Result<Vec<UniformPoint>> {
    let t = Table::read(path)?;
    t.rows
        .iter()
        .map(|row| {
            Ok(UniformPoint {
                p: t.parse(row, "p_uniform")?,
                seed: t.parse(row, "seed")?,
                energy: t.parse(row, "E_norm")?,
                acc_mean: t.parse(row, "acc_mean")?,
                acc_halfwidth: t.parse(row, "acc_halfwidth")?,
                trials: t.parse(row, "trials")?,
            })
        })
        .collect()
}

pub fn write_sweep(path: &Path, cells: &[SweepCell]) -> Result<()> {
    let rows = cells
        .iter()
        .map(|c| vec![f64_cell(c.p_t), f64_cell(c.p_eval), f64_cell(c.acc_mean), f64_cell(c.acc_halfwidth)]);
    write_table(path, &header(&["p_t", "p_eval", "acc_mean", "acc_halfwidth"]), rows)
}

pub fn read_sweep(path: &Path) -> Result<Vec<SweepCell>> {
    let t = Table::read(path)?;
    t.rows
        .iter()
        .map(|row| {
            Ok(SweepCell {
                p_t: t.parse(row, "p_t")?,
                p_eval: t.parse(row, "p_eval")?,
                acc_mean: t.parse(row, "acc_mean")?,
                acc_halfwidth: t.parse(row, "acc_halfwidth")?,
            })
        })
        .collect()
}

pub fn write_sweep_runs(path: &Path, runs: &[SweepRun]) -> Result<()> {
    let rows = runs.iter().map(|r| {
        vec![
            r.seed.to_string(),
            f64_cell(r.p_t),
            f64_cell(r.p_eval),
            f64_cell(r.acc_mean),
            f64_cell(r.acc_halfwidth),
            r.trials.to_string(),
        ]
    });
    write_table(
        path,
        &header(&["seed", "p_t", "p_eval", "acc_mean", "acc_halfwidth", "trials"]),
        rows,
    )
}

pub fn read_sweep_runs(path: &Path) -> Result<Vec<SweepRun>> {
    let t = Table::read(path)?;
    t.rows
        .iter()
        .map(|row| {
            Ok(SweepRun {
                seed: t.parse(row, "seed")?,
                p_t: t.parse(row, "p_t")?,
                p_eval: t.parse(row, "p_eval")?,
                acc_mean: t.parse(row, "acc_mean")?,
                acc_halfwidth: t.parse(row, "acc_halfwidth")?,
                trials: t.parse(row, "trials")?,
            })
        })
        .collect()
}

pub fn write_sensitivity(path: &Path, rows: &[SensitivityRow]) -> Result<()> {
    let body = rows.iter().map(|r| {
        let b = &r.stats;
        vec![
            r.layer.to_string(),
            f64_cell(b.min),
            f64_cell(b.q1),
            f64_cell(b.median),
            f64_cell(b.q3),
            f64_cell(b.max),
            f64_cell(r.baseline),
        ]
    });
    write_table(
        path,
        &header(&["layer", "min", "q1", "median", "q3", "max", "baseline"]),
        body,
    )
}

pub fn read_sensitivity(path: &Path) -> Result<Vec<SensitivityRow>> {
    let t = Table::read(path)?;
    t.rows
        .iter()
        .map(|row| {
            Ok(SensitivityRow {
                layer: t.parse(row, "layer")?,
                stats: BoxStats {
                    min: t.parse(row, "min")?,
                    q1: t.parse(row, "q1")?,
                    median: t.parse(row, "median")?,
                    q3: t.parse(row, "q3")?,
                    max: t.parse(row, "max")?,
                },
                baseline: t.parse(row, "baseline")?,
            })
        })
        .collect()
}

/// Raw per-trial accuracies behind the sensitivity box statistics.
pub fn write_sensitivity_samples(path: &Path, samples: &[(usize, Vec<f64>)]) -> Result<()> {
    let rows = samples.iter().flat_map(|(layer, s)| {
        s.iter()
            .enumerate()
            .map(move |(i, v)| vec![layer.to_string(), (i + 1).to_string(), f64_cell(*v)])
    });
    write_table(path, &header(&["layer", "trial", "accuracy"]), rows)
}

pub fn read_sensitivity_samples(path: &Path) -> Result<Vec<(usize, Vec<f64>)>> {
    let t = Table::read(path)?;
    let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
    for row in &t.rows {
        let layer: usize = t.parse(row, "layer")?;
        let v: f64 = t.parse(row, "accuracy")?;
        match out.last_mut() {
            Some((l, s)) if *l == layer => s.push(v),
            _ => out.push((layer, vec![v])),
        }
    }
    Ok(out)
}

pub fn epoch_header(layers: usize) -> Vec<String> {
    let mut h = header(&["epoch", "lr"]);
    h.extend(numbered("p", layers));
    h.extend(header(&["E_norm", "mean_loss", "best_loss"]));
    h.extend(numbered("slope", layers));
    h.extend(header(&["unit_norm", "outer_update", "p_tilde_min", "p_tilde_max"]));
    h
}

/// One row per epoch. Slope and norm cells are empty when no regression ran.
pub fn write_epoch_log(path: &Path, report: &TrainReport, layers: usize) -> Result<()> {
    let rows = report.epochs.iter().map(|e| {
        let mut r = vec![e.epoch.to_string(), f64_cell(e.lr)];
        r.extend(e.p.iter().copied().map(f64_cell));
        r.extend([f64_cell(e.energy), f64_cell(e.mean_loss), f64_cell(e.best_loss)]);
        match &e.slopes {
            Some(s) => r.extend(s.iter().copied().map(f64_cell)),
            None => r.extend(std::iter::repeat_n(String::new(), layers)),
        }
        r.push(e.unit_norm.map(f64_cell).unwrap_or_default());
        r.push(u8::from(e.outer_update).to_string());
        r.extend([f64_cell(e.p_tilde_min), f64_cell(e.p_tilde_max)]);
        r
    });
    write_table(path, &epoch_header(layers), rows)
}

pub fn write_failures(path: &Path, failures: &[Failure]) -> Result<()> {
    let rows = failures
        .iter()
        .map(|x| vec![x.run.clone(), x.seed.to_string(), x.error.clone()]);
    write_table(path, &header(&["run", "seed", "error"]), rows)
}

pub fn eval_header(layers: usize) -> Vec<String> {
    let mut h = header(&["seed"]);
    h.extend(numbered("p", layers));
    h.extend(header(&["E_norm", "acc_mean", "acc_halfwidth", "trials", "converged"]));
    h
}

#[derive(Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    experiment: &'a str,
    files: BTreeMap<&'a str, &'a str>,
}

/// `files` maps each emitted file name to a one-line description.
pub fn write_manifest(dir: &Path, experiment: &str, files: &[(&str, &str)]) -> Result<()> {
    let m = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment,
        files: files.iter().copied().collect(),
    };
    let mut bytes = serde_json::to_vec_pretty(&m)?;
    bytes.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &bytes)
}
