//! Dataset files and synthetic Laplace-kernel data.
//!
//! CSV files have a header; the column named `y` is the target and every
//! other column is a numeric feature. Floats are written in the shortest
//! form that parses back to the same value.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::laplace;
use crate::rng::stream_rng;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>) -> Result<Self> {
        let dim = x.first().map_or(0, |r| r.len());
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        if let Some(r) = x.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Ok(Self {
            feature_names: (0..dim).map(|d| format!("x{d}")).collect(),
            x,
            y,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    /// Split off the first `n` rows.
    pub fn split_at(&self, n: usize) -> (Dataset, Dataset) {
        let n = n.min(self.len());
        let part = |x: &[Vec<f64>], y: &[f64]| Dataset {
            feature_names: self.feature_names.clone(),
            x: x.to_vec(),
            y: y.to_vec(),
        };
        (part(&self.x[..n], &self.y[..n]), part(&self.x[n..], &self.y[n..]))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for name in &self.feature_names {
            write!(out, "{name},").unwrap();
        }
        out.push_str("y\n");
        for (row, y) in self.x.iter().zip(&self.y) {
            for v in row {
                write!(out, "{v:?},").unwrap();
            }
            writeln!(out, "{y:?}").unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str, origin: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_string(),
            line,
            message,
        };
        let headers = reader
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        let target = headers
            .iter()
            .position(|h| h == "y")
            .ok_or_else(|| parse_err(1, "no column named \"y\"".into()))?;
        let feature_names: Vec<String> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != target)
            .map(|(_, h)| h.to_string())
            .collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                parse_err(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != headers.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", headers.len(), record.len())));
            }
            let mut row = Vec::with_capacity(feature_names.len());
            for (i, field) in record.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line, format!("not a number: {field:?}")))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("non-finite value {field:?}")));
                }
                if i == target {
                    y.push(v);
                } else {
                    row.push(v);
                }
            }
            x.push(row);
        }
        Ok(Self { feature_names, x, y })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv_str(&text, &path.display().to_string())
    }

    /// Whitespace-separated `label index:value …` lines with 1-based
    /// indices; missing indices are zero.
    pub fn from_libsvm_str(text: &str, origin: &str) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut y = Vec::new();
        let mut dim = 0;
        for (i, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: i + 1,
                message,
            };
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let label = fields.next().expect("line is nonempty");
            y.push(label.parse().map_err(|_| err(format!("bad label {label:?}")))?);
            let mut row = Vec::new();
            for f in fields {
                let (idx, val) = f
                    .split_once(':')
                    .ok_or_else(|| err(format!("expected index:value, found {f:?}")))?;
                let idx: usize = idx.parse().map_err(|_| err(format!("bad index {idx:?}")))?;
                if idx == 0 {
                    return Err(err("indices start at 1".into()));
                }
                let val: f64 = val.parse().map_err(|_| err(format!("bad value {val:?}")))?;
                if !val.is_finite() {
                    return Err(err(format!("non-finite value {val:?}")));
                }
                dim = dim.max(idx);
                row.push((idx - 1, val));
            }
            rows.push(row);
        }
        let x = rows
            .into_iter()
            .map(|r| {
                let mut dense = vec![0.0; dim];
                for (i, v) in r {
                    dense[i] = v;
                }
                dense
            })
            .collect();
        let mut ds = Self::new(x, y)?;
        ds.feature_names = (1..=dim).map(|d| format!("f{d}")).collect();
        Ok(ds)
    }

    pub fn read_libsvm(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_libsvm_str(&text, &path.display().to_string())
    }

    /// Read a `.csv` file, or anything else as libsvm.
    pub fn read(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => Self::read_csv(path),
            _ => Self::read_libsvm(path),
        }
    }
}

/// Largest total number of points the dense generator accepts.
pub const MAX_SYNTHETIC_POINTS: usize = 3000;

/// Uniform inputs on `[0,1]^D` with targets drawn jointly from a centred
/// Gaussian with covariance `exp(-λ₀‖x_i − x_j‖₁) + σ²δ_ij`.
pub fn synthetic_laplace(n: usize, dim: usize, lifetime: f64, noise: f64, seed: u64) -> Result<Dataset> {
    if n > MAX_SYNTHETIC_POINTS {
        return Err(Error::InvalidParameter(format!(
            "at most {MAX_SYNTHETIC_POINTS} synthetic points are supported, got {n}"
        )));
    }
    if !(lifetime.is_finite() && lifetime >= 0.0) {
        return Err(Error::InvalidLifetime(lifetime));
    }
    if !(noise.is_finite() && noise >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise must be non-negative, got {noise}")));
    }
    let mut rng = stream_rng(seed, 0);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let y = laplace_gp_targets(&x, lifetime, noise, &mut rng)?;
    Dataset::new(x, y)
}

/// One joint draw of targets at fixed inputs from the centred Gaussian with
/// covariance `exp(-λ₀‖x_i − x_j‖₁) + σ²δ_ij`.
pub fn laplace_gp_targets<R: Rng + ?Sized>(x: &[Vec<f64>], lifetime: f64, noise: f64, rng: &mut R) -> Result<Vec<f64>> {
    let n = x.len();
    if n > MAX_SYNTHETIC_POINTS {
        return Err(Error::InvalidParameter(format!(
            "at most {MAX_SYNTHETIC_POINTS} synthetic points are supported, got {n}"
        )));
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = laplace(&x[i], &x[j], lifetime)?;
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
        gram[(i, i)] += noise * noise;
    }
    let factor = match gram.clone().cholesky() {
        Some(f) => f,
        None => {
            let jittered = gram + DMatrix::identity(n, n) * 1e-8;
            jittered
                .cholesky()
                .ok_or_else(|| Error::Numerical("covariance is not positive definite even with jitter".into()))?
        }
    };
    let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
    Ok((factor.l() * z).iter().copied().collect())
}
