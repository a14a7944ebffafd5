//! Synthetic data generation, evaluation grids and CSV persistence.
//!
//! The toy generator draws inputs uniformly on `[0, 1]` and targets
//! `y = f(x) + w` with `f(x) = |x - 1/2| - 1/2` and standard Gaussian noise
//! `w`. For a given seed all inputs are drawn first, then all noise values,
//! so the input sample is stable across uses of the generator.
//!
//! CSV schema: a header row with feature columns `x0..x{d-1}`, a target
//! column `y` and an optional `ftrue` column; UTF-8, comma-separated,
//! `.` decimal. Floats are written in shortest round-trip form, so a
//! save/load cycle reproduces every value exactly.

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// A regression sample: inputs `x` (rows are points), targets `y`, and for
/// synthetic data the noiseless target values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Array1<f64>,
    pub f_true: Option<Array1<f64>>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, f_true: Option<Array1<f64>>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid(
                "dataset must have n >= 1 points of dimension >= 1",
            ));
        }
        if y.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: y.len(),
            });
        }
        if let Some(f) = &f_true {
            if f.len() != x.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: x.nrows(),
                    got: f.len(),
                });
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("targets must be finite"));
        }
        Ok(Dataset {
            x,
            y,
            f_true,
            seed: None,
        })
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `range` of this dataset as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!(
                "bad slice {start}..{end} of {}",
                self.len()
            )));
        }
        Ok(Dataset {
            x: self.x.slice(ndarray::s![start..end, ..]).to_owned(),
            y: self.y.slice(ndarray::s![start..end]).to_owned(),
            f_true: self
                .f_true
                .as_ref()
                .map(|f| f.slice(ndarray::s![start..end]).to_owned()),
            seed: self.seed,
        })
    }
}

/// The toy regression function `f(x) = |x - 1/2| - 1/2`.
pub fn toy_target(x: f64) -> f64 {
    (x - 0.5).abs() - 0.5
}

/// Generate the 1-D toy sample: `x ~ U[0,1]`, `y = f(x) + N(0,1)` noise.
pub fn gen_toy(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be >= 1"));
    }
    let mut rng = rng::seeded(seed, rng::STREAM_DATA);
    let xs: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
    let noise: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let f: Array1<f64> = xs.iter().map(|&x| toy_target(x)).collect();
    let y: Array1<f64> = f.iter().zip(noise.iter()).map(|(f, w)| f + w).collect();
    let x = Array2::from_shape_vec((n, 1), xs).expect("shape");
    let mut ds = Dataset::new(x, y, Some(f))?;
    ds.seed = Some(seed);
    Ok(ds)
}

/// How evaluation points are placed on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMeasure {
    /// Deterministic cell midpoints `(i + 1/2) / count`.
    MidpointGrid,
    /// A seeded uniform draw.
    Random { seed: u64 },
}

/// Evaluation points on `[0, 1]` paired with noiseless target values.
pub fn eval_grid(count: usize, measure: EvalMeasure) -> Result<(Array2<f64>, Array1<f64>)> {
    if count == 0 {
        return Err(Error::invalid("evaluation point count must be >= 1"));
    }
    let xs: Vec<f64> = match measure {
        EvalMeasure::MidpointGrid => (0..count)
            .map(|i| (i as f64 + 0.5) / count as f64)
            .collect(),
        EvalMeasure::Random { seed } => {
            let mut rng = rng::seeded(seed, rng::STREAM_EVAL);
            (0..count).map(|_| rng.gen::<f64>()).collect()
        }
    };
    let f: Array1<f64> = xs.iter().map(|&x| toy_target(x)).collect();
    let points = Array2::from_shape_vec((count, 1), xs).expect("shape");
    Ok((points, f))
}

/// Add standard Gaussian noise to target values, deterministically per
/// seed. Used to build noisy evaluation measures.
pub fn noisy_targets(noiseless: ndarray::ArrayView1<f64>, seed: u64) -> Array1<f64> {
    let mut rng = rng::seeded(seed, rng::STREAM_EVAL_NOISE);
    noiseless
        .iter()
        .map(|&f| f + rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Write a dataset to `path` in the documented CSV schema.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
    let d = ds.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("x{j}")).collect();
    header.push("y".to_string());
    if ds.f_true.is_some() {
        header.push("ftrue".to_string());
    }
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = (0..d).map(|j| ds.x[[i, j]].to_string()).collect();
        rec.push(ds.y[i].to_string());
        if let Some(f) = &ds.f_true {
            rec.push(f[i].to_string());
        }
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Load a dataset from the documented CSV schema. Malformed headers, ragged
/// rows and non-numeric cells are reported with their line number.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path.as_ref())
        .map_err(csv_io)?;

    let header = r
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let cols: Vec<&str> = header.iter().collect();
    let d = cols.iter().take_while(|c| c.starts_with('x')).count();
    for (j, c) in cols.iter().enumerate().take(d) {
        if *c != format!("x{j}") {
            return Err(parse_err(1, format!("expected column x{j}, found {c:?}")));
        }
    }
    if d == 0 {
        return Err(parse_err(1, "no feature columns x0.. found".to_string()));
    }
    let has_y = cols.get(d) == Some(&"y");
    if !has_y {
        return Err(parse_err(1, "missing y column after features".to_string()));
    }
    let has_ftrue = cols.get(d + 1) == Some(&"ftrue");
    let expected_len = d + 1 + usize::from(has_ftrue);
    if cols.len() != expected_len {
        return Err(parse_err(
            1,
            format!("expected {expected_len} columns, found {}", cols.len()),
        ));
    }

    let mut xs: Vec<f64> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut fs: Vec<f64> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| {
            let line = match &e.position() {
                Some(p) => p.line(),
                None => 0,
            };
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != expected_len {
            return Err(parse_err(
                line,
                format!("expected {expected_len} cells, found {}", rec.len()),
            ));
        }
        for j in 0..d {
            xs.push(parse_cell(&rec, j, line)?);
        }
        ys.push(parse_cell(&rec, d, line)?);
        if has_ftrue {
            fs.push(parse_cell(&rec, d + 1, line)?);
        }
    }
    if ys.is_empty() {
        return Err(parse_err(1, "no data rows".to_string()));
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, d), xs).expect("shape");
    Dataset::new(x, Array1::from(ys), has_ftrue.then(|| Array1::from(fs)))
}

fn parse_cell(rec: &csv::StringRecord, j: usize, line: u64) -> Result<f64> {
    let cell = rec.get(j).unwrap_or("");
    cell.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("non-numeric cell {cell:?} in column {j}")))
}

fn parse_err(line: u64, msg: String) -> Error {
    Error::Parse { line, msg }
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Numerical(format!("csv write failure: {other:?}")),
    }
}
