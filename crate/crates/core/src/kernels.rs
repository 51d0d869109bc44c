//! Exact Laplace kernel, the Mondrian kernel of finite order, and the
//! approximation error between them.

use std::num::NonZeroUsize;

use crate::error::{Error, Result};
use crate::features::{FeatureIndexer, SparseFeatureVector};
use crate::mondrian::Forest;

/// Order of the kernel: a finite number of trees, or the exact limit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelOrder {
    Finite(NonZeroUsize),
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelConfig {
    lifetime: f64,
    order: KernelOrder,
}

impl KernelConfig {
    pub fn new(lifetime: f64, order: KernelOrder) -> Result<Self> {
        if !(lifetime.is_finite() && lifetime >= 0.0) {
            return Err(Error::InvalidLifetime(lifetime));
        }
        Ok(Self { lifetime, order })
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn order(&self) -> KernelOrder {
        self.order
    }
}

pub fn l1_distance(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum())
}

/// `exp(-λ‖x − x′‖₁)`.
pub fn laplace(x: &[f64], y: &[f64], lifetime: f64) -> Result<f64> {
    let d = l1_distance(x, y)?;
    if lifetime == 0.0 {
        return Ok(1.0);
    }
    Ok((-lifetime * d).exp())
}

/// Fraction of trees in which the two points share a cell.
pub fn mondrian_kernel(a: &SparseFeatureVector, b: &SparseFeatureVector) -> Result<f64> {
    a.dot(b)
}

/// `|k_M − k_∞|` for every unordered pair `i < j` (the diagonal is exact).
pub fn pairwise_errors<P: AsRef<[f64]>>(data: &[P], forest: &Forest, lifetime: f64) -> Result<Vec<f64>> {
    let (_, phi) = FeatureIndexer::build_features(forest, lifetime, data)?;
    let mut out = Vec::with_capacity(data.len() * data.len().saturating_sub(1) / 2);
    for i in 0..data.len() {
        for j in i + 1..data.len() {
            let exact = laplace(data[i].as_ref(), data[j].as_ref(), lifetime)?;
            out.push((phi.gram(i, j) - exact).abs());
        }
    }
    Ok(out)
}

/// Largest absolute kernel error over all pairs of `data`.
pub fn max_abs_error<P: AsRef<[f64]>>(data: &[P], forest: &Forest, lifetime: f64) -> Result<f64> {
    Ok(pairwise_errors(data, forest, lifetime)?
        .into_iter()
        .fold(0.0, f64::max))
}

/// Kernel value under `config`: exact Laplace, or a fresh Mondrian estimate
/// from the given forest.
pub fn evaluate(config: &KernelConfig, forest: Option<&Forest>, x: &[f64], y: &[f64]) -> Result<f64> {
    match config.order {
        KernelOrder::Exact => laplace(x, y, config.lifetime),
        KernelOrder::Finite(m) => {
            let forest = forest.ok_or_else(|| Error::InvalidParameter("finite order needs a forest".into()))?;
            if forest.len() != m.get() {
                return Err(Error::IndexerMismatch);
            }
            let mut shared = 0usize;
            for t in forest.trees() {
                if t.cell_lookup(x, config.lifetime)? == t.cell_lookup(y, config.lifetime)? {
                    shared += 1;
                }
            }
            Ok(shared as f64 / m.get() as f64)
        }
    }
}
