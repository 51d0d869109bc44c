use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded product of closed intervals `[lower[d], upper[d]]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignedBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl AxisAlignedBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        for (d, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidBox(format!("non-finite bound in dimension {d}")));
            }
            if lo > hi {
                return Err(Error::InvalidBox(format!(
                    "lower bound {lo} exceeds upper bound {hi} in dimension {d}"
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    /// The degenerate box holding a single point.
    pub fn point(x: &[f64]) -> Self {
        Self {
            lower: x.to_vec(),
            upper: x.to_vec(),
        }
    }

    /// Smallest box containing every point, or `None` for an empty input.
    pub fn bounding<'a, I>(points: I) -> Option<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut out = Self::point(first);
        for x in iter {
            out.include(x);
        }
        Some(out)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn side(&self, d: usize) -> f64 {
        self.upper[d] - self.lower[d]
    }

    /// Sum of side lengths; the total rate of the cut clocks of this box.
    pub fn linear_dimension(&self) -> f64 {
        (0..self.dim()).map(|d| self.side(d)).sum()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn contains_box(&self, other: &AxisAlignedBox) -> bool {
        other.dim() == self.dim()
            && (0..self.dim())
                .all(|d| self.lower[d] <= other.lower[d] && other.upper[d] <= self.upper[d])
    }

    /// Grow the box in place so that it contains `x`.
    pub fn include(&mut self, x: &[f64]) {
        for (d, &v) in x.iter().enumerate() {
            if v < self.lower[d] {
                self.lower[d] = v;
            }
            if v > self.upper[d] {
                self.upper[d] = v;
            }
        }
    }

    pub fn expanded_to(&self, x: &[f64]) -> Self {
        let mut out = self.clone();
        out.include(x);
        out
    }

    /// Split by the hyperplane `x_d = location` into the `<` and `>` halves.
    pub fn split(&self, d: usize, location: f64) -> (Self, Self) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.upper[d] = location;
        right.lower[d] = location;
        (left, right)
    }
}
