//! Sensor data ingestion and standardization.
//!
//! Data are held sensors × samples: column `i` of [`DataMatrix::values`] is
//! the measurement vector of sample `i`, rows are sensors. CSV files use the
//! opposite (row per sample) layout and are transposed on load.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
    tags: Vec<String>,
    sample_period: Option<f64>,
}

impl DataMatrix {
    /// Builds a matrix from sensors × samples values. Requires finite entries,
    /// one tag per row, at least one sensor and two samples.
    pub fn new(values: DMatrix<f64>, tags: Vec<String>) -> Result<Self> {
        if tags.len() != values.nrows() {
            return Err(Error::dim(format!(
                "{} tags for {} sensors",
                tags.len(),
                values.nrows()
            )));
        }
        if values.nrows() == 0 {
            return Err(Error::invalid("data matrix needs at least one sensor"));
        }
        if values.ncols() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                found: values.ncols(),
            });
        }
        for i in 0..values.ncols() {
            for j in 0..values.nrows() {
                if !values[(j, i)].is_finite() {
                    return Err(Error::NonFinite {
                        row: i + 1,
                        column: j + 1,
                    });
                }
            }
        }
        Ok(Self {
            values,
            tags,
            sample_period: None,
        })
    }

    /// Same as [`DataMatrix::new`] with generated tags `x1..xm`.
    pub fn from_values(values: DMatrix<f64>) -> Result<Self> {
        let tags = (1..=values.nrows()).map(|j| format!("x{j}")).collect();
        Self::new(values, tags)
    }

    pub fn with_sample_period(mut self, seconds: f64) -> Self {
        self.sample_period = Some(seconds);
        self
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn sample_period(&self) -> Option<f64> {
        self.sample_period
    }

    /// Number of sensors.
    pub fn n_sensors(&self) -> usize {
        self.values.nrows()
    }

    /// Number of samples.
    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.values.column(i).into_owned()
    }

    /// Replaces the values while keeping tags and sample period.
    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> Self {
        debug_assert_eq!(values.shape(), self.values.shape());
        Self {
            values,
            tags: self.tags.clone(),
            sample_period: self.sample_period,
        }
    }

    /// Writes a header row of tags followed by one row per sample.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.tags).map_err(|e| Error::Csv(e.to_string()))?;
        let mut row = Vec::with_capacity(self.n_sensors());
        for i in 0..self.n_samples() {
            row.clear();
            row.extend(self.values.column(i).iter().map(|v| v.to_string()));
            w.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Reads a CSV file with a header of tag names and one sample per row.
///
/// Errors name the 1-based file row (the header is row 1) and column.
pub fn load_csv(path: impl AsRef<Path>) -> Result<DataMatrix> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(file)
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<DataMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let tags: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Csv(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let m = tags.len();
    if m == 0 || (m == 1 && tags[0].is_empty()) {
        return Err(Error::Csv("missing header row".into()));
    }

    let mut flat: Vec<f64> = Vec::new();
    let mut n = 0;
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|e| Error::Csv(e.to_string()))?;
        if record.len() != m {
            return Err(Error::RaggedRow {
                row,
                found: record.len(),
                expected: m,
            });
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| Error::NonNumeric {
                row,
                column: j + 1,
                value: field.to_owned(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite { row, column: j + 1 });
            }
            flat.push(v);
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    // flat is sample-major, which is column-major for an m × n matrix.
    DataMatrix::new(DMatrix::from_vec(m, n, flat), tags)
}

/// Per-sensor z-scoring parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub tags: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit(x: &DataMatrix) -> Result<Self> {
        fit_scaler(x)
    }

    pub fn apply(&self, x: &DataMatrix) -> Result<DataMatrix> {
        apply_scaler(self, x)
    }

    pub fn n_sensors(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_vector(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.mean.len() {
            return Err(Error::dim(format!(
                "vector of length {} for a scaler over {} sensors",
                y.len(),
                self.mean.len()
            )));
        }
        Ok(DVector::from_fn(y.len(), |j, _| {
            (y[j] - self.mean[j]) / self.std[j]
        }))
    }

    /// Maps standardized data back to engineering units.
    pub fn inverse(&self, z: &DataMatrix) -> Result<DataMatrix> {
        self.check(z)?;
        let v = z.values();
        let out = DMatrix::from_fn(v.nrows(), v.ncols(), |j, i| {
            v[(j, i)] * self.std[j] + self.mean[j]
        });
        Ok(z.with_values(out))
    }

    fn check(&self, x: &DataMatrix) -> Result<()> {
        if x.n_sensors() != self.mean.len() {
            return Err(Error::dim(format!(
                "data has {} sensors, scaler has {}",
                x.n_sensors(),
                self.mean.len()
            )));
        }
        if x.tags() != self.tags.as_slice() {
            let pos = x
                .tags()
                .iter()
                .zip(&self.tags)
                .position(|(a, b)| a != b)
                .unwrap_or(0);
            return Err(Error::dim(format!(
                "tag mismatch at column {}: data {:?}, scaler {:?}",
                pos + 1,
                x.tags()[pos],
                self.tags[pos]
            )));
        }
        Ok(())
    }
}

/// Sample mean and standard deviation (divisor `n - 1`) of every sensor.
pub fn fit_scaler(x: &DataMatrix) -> Result<Scaler> {
    let v = x.values();
    let n = v.ncols() as f64;
    let mut mean = Vec::with_capacity(v.nrows());
    let mut std = Vec::with_capacity(v.nrows());
    for (j, row) in v.row_iter().enumerate() {
        let mu = row.iter().sum::<f64>() / n;
        let ss: f64 = row.iter().map(|&a| (a - mu) * (a - mu)).sum();
        let sd = (ss / (n - 1.0)).sqrt();
        if !(sd > 0.0) || sd <= 1e-12 * mu.abs() {
            return Err(Error::ConstantSensor(x.tags()[j].clone()));
        }
        mean.push(mu);
        std.push(sd);
    }
    Ok(Scaler {
        tags: x.tags().to_vec(),
        mean,
        std,
    })
}

pub fn apply_scaler(s: &Scaler, x: &DataMatrix) -> Result<DataMatrix> {
    s.check(x)?;
    let v = x.values();
    let out = DMatrix::from_fn(v.nrows(), v.ncols(), |j, i| {
        (v[(j, i)] - s.mean[j]) / s.std[j]
    });
    Ok(x.with_values(out))
}
