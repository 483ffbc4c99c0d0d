//! Measurement ingestion.
//!
//! A dataset is a fixed, ordered set of `K` input/output pairs. Inputs are
//! constant in time; every consumer sees them through [`augment`], which
//! prepends the constant offset coordinate.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Prepend the constant offset coordinate: `(1, x_1, ..., x_N)`.
pub fn augment(x_raw: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x_raw.len() + 1);
    out.push(1.0);
    out.extend_from_slice(x_raw);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub x_raw: Vec<f64>,
    pub y: f64,
    /// 1-based position in the dataset.
    pub k: usize,
}

/// Immutable after construction; iteration order is file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    measurements: Vec<Measurement>,
    augmented: Vec<Vec<f64>>,
    input_dim: usize,
}

impl Dataset {
    /// Build from `(x_raw, y)` rows. Rejects empty input, ragged rows and
    /// non-finite values.
    pub fn from_rows<I>(input_dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<f64>, f64)>,
    {
        let mut measurements = Vec::new();
        for (idx, (x_raw, y)) in rows.into_iter().enumerate() {
            let k = idx + 1;
            if x_raw.len() != input_dim {
                return Err(Error::InvalidInput(format!(
                    "measurement {k} has {} inputs, expected {input_dim}",
                    x_raw.len()
                )));
            }
            if !y.is_finite() || x_raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "measurement {k} has a non-finite value"
                )));
            }
            measurements.push(Measurement { x_raw, y, k });
        }
        if measurements.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let augmented = measurements.iter().map(|m| augment(&m.x_raw)).collect();
        Ok(Dataset {
            measurements,
            augmented,
            input_dim,
        })
    }

    /// Convenience for scalar inputs.
    pub fn from_1d(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidInput(format!(
                "{} inputs but {} outputs",
                xs.len(),
                ys.len()
            )));
        }
        Self::from_rows(1, xs.iter().zip(ys).map(|(&x, &y)| (vec![x], y)))
    }

    pub fn len(&self) -> usize {
        self.measurements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measurements.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn measurements(&self) -> &[Measurement] {
        &self.measurements
    }

    /// Augmented input of the measurement at 0-based position `idx`.
    pub fn x_aug(&self, idx: usize) -> &[f64] {
        &self.augmented[idx]
    }

    pub fn y(&self, idx: usize) -> f64 {
        self.measurements[idx].y
    }

    pub fn ys(&self) -> Vec<f64> {
        self.measurements.iter().map(|m| m.y).collect()
    }

    /// `(x_aug, y)` pairs in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.augmented
            .iter()
            .zip(&self.measurements)
            .map(|(x, m)| (x.as_slice(), m.y))
    }

    /// Parse CSV text with `input_dim + 1` numeric columns. A single header
    /// line is skipped when its first field is not numeric.
    pub fn parse_csv(text: &str, input_dim: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());

        let mut rows = Vec::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse {
                line: e.position().map_or(idx + 1, |p| p.line() as usize),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(idx + 1, |p| p.line() as usize);
            if idx == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            if record.len() != input_dim + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} columns, found {}", input_dim + 1, record.len()),
                });
            }
            let mut values = Vec::with_capacity(input_dim + 1);
            for field in record.iter() {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        message: format!("non-finite value: {field:?}"),
                    });
                }
                values.push(v);
            }
            let y = values.pop().expect("at least one column");
            rows.push((values, y));
        }
        Self::from_rows(input_dim, rows)
    }

    /// Serialize with shortest round-trip formatting, no header.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for m in &self.measurements {
            for x in &m.x_raw {
                let _ = write!(out, "{x},");
            }
            let _ = writeln!(out, "{}", m.y);
        }
        out
    }
}

/// Load a CSV dataset from disk (see [`Dataset::parse_csv`]).
pub fn load_dataset(path: impl AsRef<Path>, input_dim: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Dataset::parse_csv(&text, input_dim)
}
