//! CSV and JSON file formats.
//!
//! Floating-point values are written in Rust's shortest round-trip form, so
//! every file re-reads to the identical `f64`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use kfpca_core::simulation::{BenchmarkReport, MethodMetrics, MetricSummary};
use kfpca_core::{Curve, SurfaceEstimate};
use kfpca_core::{Dataset, Domain, EigenSystem, Grid, Kernel, RawSurfacePoint, ScoreEstimate, SparseSample};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LONG_CSV_HEADER: [&str; 3] = ["subject_id", "time", "value"];

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(w)
}

fn finish<W: Write>(mut w: csv::Writer<W>, source: &str) -> Result<()> {
    w.flush().map_err(|e| Error::format(source, e))
}

fn write_row<W: Write, I, T>(w: &mut csv::Writer<W>, source: &str, row: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| Error::format(source, e))
}

fn parse_number(field: &str, what: &str, source: &str, row: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            source_name: source.into(),
            row,
            message: format!("{what} {field:?} is not a finite number"),
        })
}

/// Reads long-format `subject_id,time,value` rows.
///
/// Subjects keep their order of first appearance and times are sorted within
/// each subject. Without `domain` the domain is `[min time, max time]`. Row
/// numbers in errors count data rows from 1.
pub fn read_long_csv_from<R: Read>(reader: R, source: &str, domain: Option<Domain>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| Error::format(source, e))?,
        None => {
            return Err(Error::Parse {
                source_name: source.into(),
                row: 0,
                message: "empty file; expected header subject_id,time,value".into(),
            })
        }
    };
    if header.iter().collect::<Vec<_>>() != LONG_CSV_HEADER {
        return Err(Error::Parse {
            source_name: source.into(),
            row: 0,
            message: format!(
                "expected header subject_id,time,value, found {:?}",
                header.iter().collect::<Vec<_>>()
            ),
        });
    }

    let mut order: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            source_name: source.into(),
            row,
            message: e.to_string(),
        })?;
        if rec.len() != 3 {
            return Err(Error::Parse {
                source_name: source.into(),
                row,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        let id = &rec[0];
        if id.is_empty() {
            return Err(Error::Parse {
                source_name: source.into(),
                row,
                message: "empty subject_id".into(),
            });
        }
        let t = parse_number(&rec[1], "time", source, row)?;
        let y = parse_number(&rec[2], "value", source, row)?;
        let k = *index.entry(id.to_string()).or_insert_with(|| {
            order.push((id.to_string(), Vec::new()));
            order.len() - 1
        });
        order[k].1.push((t, y));
    }
    let samples = order
        .into_iter()
        .map(|(id, pairs)| SparseSample::from_pairs(id, pairs))
        .collect::<kfpca_core::Result<Vec<_>>>()?;
    let dataset = match domain {
        Some(d) => Dataset::new(d, samples)?,
        None => Dataset::with_inferred_domain(samples)?,
    };
    Ok(dataset)
}

pub fn read_long_csv(path: &Path, domain: Option<Domain>) -> Result<Dataset> {
    read_long_csv_from(open(path)?, &path.display().to_string(), domain)
}

/// Writes samples in long format. An empty list is an error.
pub fn write_long_csv_to<W: Write>(samples: &[SparseSample], writer: W) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::Usage("no samples to write".into()));
    }
    let mut w = csv_writer(writer);
    write_row(&mut w, "long csv", LONG_CSV_HEADER)?;
    for s in samples {
        for (t, y) in s.times().iter().zip(s.values()) {
            write_row(
                &mut w,
                "long csv",
                [s.subject_id().to_string(), t.to_string(), y.to_string()],
            )?;
        }
    }
    finish(w, "long csv")
}

pub fn write_long_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    write_long_csv_to(dataset.samples(), create(path)?)
}

/// Surface as CSV: grid points on the first row, then one row per grid point.
pub fn write_surface_csv_to<W: Write>(surface: &SurfaceEstimate, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    write_row(
        &mut w,
        "surface csv",
        surface.grid().points().iter().map(f64::to_string),
    )?;
    for a in 0..surface.size() {
        write_row(&mut w, "surface csv", surface.row(a).iter().map(f64::to_string))?;
    }
    finish(w, "surface csv")
}

pub fn write_surface_csv(surface: &SurfaceEstimate, path: &Path) -> Result<()> {
    write_surface_csv_to(surface, create(path)?)
}

pub fn read_surface_csv_from<R: Read>(reader: R, source: &str) -> Result<SurfaceEstimate> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(source, e))?;
        let values = rec
            .iter()
            .map(|f| parse_number(f, "entry", source, row))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    let Some((points, matrix)) = rows.split_first() else {
        return Err(Error::Parse {
            source_name: source.into(),
            row: 0,
            message: "empty surface file".into(),
        });
    };
    let g = points.len();
    if matrix.len() != g || matrix.iter().any(|r| r.len() != g) {
        return Err(Error::Parse {
            source_name: source.into(),
            row: 0,
            message: format!("expected a {g} x {g} matrix after the grid row"),
        });
    }
    let grid = Grid::from_points(points.clone())?;
    Ok(SurfaceEstimate::new(grid, matrix.concat())?)
}

pub fn read_surface_csv(path: &Path) -> Result<SurfaceEstimate> {
    read_surface_csv_from(open(path)?, &path.display().to_string())
}

/// JSON envelope of a smoothed surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceJson {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub bandwidth: f64,
    pub kernel: Kernel,
}

impl SurfaceJson {
    pub fn new(surface: &SurfaceEstimate, bandwidth: f64, kernel: Kernel) -> Self {
        Self {
            grid: surface.grid().points().to_vec(),
            values: (0..surface.size()).map(|a| surface.row(a).to_vec()).collect(),
            bandwidth,
            kernel,
        }
    }

    pub fn to_surface(&self) -> Result<SurfaceEstimate> {
        let grid = Grid::from_points(self.grid.clone())?;
        Ok(SurfaceEstimate::new(grid, self.values.concat())?)
    }
}

pub fn write_raw_points_csv(points: &[RawSurfacePoint], path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?);
    write_row(&mut w, "raw points csv", ["s", "t", "value", "subject_index"])?;
    for p in points {
        write_row(
            &mut w,
            "raw points csv",
            [
                p.s.to_string(),
                p.t.to_string(),
                p.value.to_string(),
                p.subject_index.to_string(),
            ],
        )?;
    }
    finish(w, "raw points csv")
}

/// JSON envelope of an eigensystem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenJson {
    pub grid: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: Vec<Vec<f64>>,
    #[serde(default)]
    pub rank_deficient: bool,
}

impl EigenJson {
    pub fn new(eigen: &EigenSystem) -> Self {
        Self {
            grid: eigen.grid.points().to_vec(),
            eigenvalues: eigen.eigenvalues.clone(),
            eigenfunctions: eigen.eigenfunctions.iter().map(|c| c.values().to_vec()).collect(),
            rank_deficient: eigen.rank_deficient,
        }
    }

    pub fn to_eigen(&self) -> Result<EigenSystem> {
        let grid = Grid::from_points(self.grid.clone())?;
        if self.eigenvalues.len() != self.eigenfunctions.len() {
            return Err(Error::Usage("eigenvalue and eigenfunction counts differ".into()));
        }
        let eigenfunctions = self
            .eigenfunctions
            .iter()
            .map(|v| Curve::new(grid.clone(), v.clone()))
            .collect::<kfpca_core::Result<Vec<_>>>()?;
        Ok(EigenSystem {
            grid,
            eigenvalues: self.eigenvalues.clone(),
            eigenfunctions,
            rank_deficient: self.rank_deficient,
        })
    }
}

/// Writes a curve as `time,value` rows.
pub fn write_curve_csv(curve: &Curve, path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?);
    write_row(&mut w, "curve csv", ["time", "value"])?;
    for (t, v) in curve.grid().points().iter().zip(curve.values()) {
        write_row(&mut w, "curve csv", [t.to_string(), v.to_string()])?;
    }
    finish(w, "curve csv")
}

/// `subject_id,score_1..score_L,usable`; unusable subjects leave the score
/// cells empty.
pub fn write_scores_csv_to<W: Write>(scores: &[ScoreEstimate], truncation: usize, writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    let mut header = vec!["subject_id".to_string()];
    header.extend((1..=truncation).map(|k| format!("score_{k}")));
    header.push("usable".into());
    write_row(&mut w, "scores csv", &header)?;
    for s in scores {
        let mut row = vec![s.subject_id.clone()];
        if s.usable {
            row.extend(s.scores.iter().map(f64::to_string));
        } else {
            row.extend(std::iter::repeat_n(String::new(), truncation));
        }
        row.push(s.usable.to_string());
        write_row(&mut w, "scores csv", &row)?;
    }
    finish(w, "scores csv")
}

pub fn write_scores_csv(scores: &[ScoreEstimate], truncation: usize, path: &Path) -> Result<()> {
    write_scores_csv_to(scores, truncation, create(path)?)
}

/// One predicted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub subject_id: String,
    pub time: f64,
    pub predicted: f64,
}

pub fn write_predictions_csv(predictions: &[Prediction], path: &Path) -> Result<()> {
    let mut w = csv_writer(create(path)?);
    write_row(&mut w, "predictions csv", ["subject_id", "time", "predicted"])?;
    for p in predictions {
        write_row(
            &mut w,
            "predictions csv",
            [p.subject_id.clone(), p.time.to_string(), p.predicted.to_string()],
        )?;
    }
    finish(w, "predictions csv")
}

/// Flat benchmark rows: one per run, method and metric.
pub fn write_runs_csv_to<W: Write>(reports: &[BenchmarkReport], writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    write_row(
        &mut w,
        "runs csv",
        ["case", "distribution", "design", "run", "method", "metric", "value"],
    )?;
    for r in reports {
        let cell = [
            r.spec.case.to_string(),
            r.spec.distribution.to_string(),
            r.spec.design.to_string(),
        ];
        for run in &r.runs {
            for (method, m) in [("kfpca", run.kfpca), ("baseline", run.baseline)] {
                for (name, v) in MethodMetrics::NAMES.iter().zip(m.to_array()) {
                    let mut row = cell.to_vec();
                    row.extend([run.run.to_string(), method.into(), (*name).into(), v.to_string()]);
                    write_row(&mut w, "runs csv", &row)?;
                }
            }
        }
    }
    finish(w, "runs csv")
}

/// Aggregate benchmark rows: mean and standard error per cell, method and
/// metric.
pub fn write_aggregate_csv_to<W: Write>(reports: &[BenchmarkReport], writer: W) -> Result<()> {
    let mut w = csv_writer(writer);
    write_row(
        &mut w,
        "aggregate csv",
        [
            "case",
            "distribution",
            "design",
            "method",
            "metric",
            "mean",
            "std_err",
            "n_completed",
            "n_excluded",
        ],
    )?;
    for r in reports {
        for (method, summary) in [("kfpca", r.kfpca), ("baseline", r.baseline)] {
            let summary: Option<MetricSummary> = summary;
            for (k, name) in MethodMetrics::NAMES.iter().enumerate() {
                let (mean, se) = summary
                    .map(|s| (s.mean.to_array()[k].to_string(), s.std_err.to_array()[k].to_string()))
                    .unwrap_or_default();
                write_row(
                    &mut w,
                    "aggregate csv",
                    [
                        r.spec.case.to_string(),
                        r.spec.distribution.to_string(),
                        r.spec.design.to_string(),
                        method.into(),
                        (*name).into(),
                        mean,
                        se,
                        r.n_completed.to_string(),
                        r.n_excluded.to_string(),
                    ],
                )?;
            }
        }
    }
    finish(w, "aggregate csv")
}

pub fn write_runs_csv(reports: &[BenchmarkReport], path: &Path) -> Result<()> {
    write_runs_csv_to(reports, create(path)?)
}

pub fn write_aggregate_csv(reports: &[BenchmarkReport], path: &Path) -> Result<()> {
    write_aggregate_csv_to(reports, create(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::format(&path.display().to_string(), e))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::format(&path.display().to_string(), e))
}
