//! Linear model over the sparse features trained by stochastic gradient
//! descent on the ridge objective `Σ(y − wᵀφ)² + δ²‖w‖²`.
//!
//! Weights are stored as `scale · v` so the shrinkage of the ℓ2 term costs
//! O(1) per step; a step only touches the nonzero coordinates of `φ`.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::features::{ColumnDelta, ColumnId};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdConfig {
    /// Initial step size `η₀`.
    pub eta0: f64,
    /// Decay horizon `t₀` of `η_t = η₀ / (1 + t/t₀)`; `None` uses the number
    /// of training points.
    pub t0: Option<f64>,
    /// Gradient steps between cut events during a sweep, in epochs per
    /// decade of lifetime.
    pub epochs_per_decade: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            eta0: 0.1,
            t0: None,
            epochs_per_decade: 1.0,
        }
    }
}

const RESCALE_BELOW: f64 = 1e-100;

#[derive(Clone, Debug)]
pub struct SgdModel {
    v: Vec<f64>,
    scale: f64,
    eta0: f64,
    t0: f64,
    /// Per-sample ℓ2 coefficient `δ²/N`.
    reg: f64,
    steps: u64,
    touched: u64,
}

impl SgdModel {
    /// `columns` zero weights; `n_train` sets the per-sample share of the
    /// regularizer and the default decay horizon.
    pub fn new(columns: usize, delta2: f64, n_train: usize, config: &SgdConfig) -> Result<Self> {
        if !(config.eta0 > 0.0 && config.eta0.is_finite()) {
            return Err(Error::InvalidParameter(format!("step size must be positive, got {}", config.eta0)));
        }
        if !(delta2 >= 0.0 && delta2.is_finite()) {
            return Err(Error::InvalidParameter(format!("δ² must be non-negative, got {delta2}")));
        }
        let n = n_train.max(1) as f64;
        let reg = delta2 / n;
        if 2.0 * config.eta0 * reg >= 1.0 {
            return Err(Error::InvalidParameter("step size too large for the regularizer".into()));
        }
        let t0 = config.t0.unwrap_or(n);
        if !(t0 > 0.0) {
            return Err(Error::InvalidParameter(format!("decay horizon must be positive, got {t0}")));
        }
        Ok(Self {
            v: vec![0.0; columns],
            scale: 1.0,
            eta0: config.eta0,
            t0,
            reg,
            steps: 0,
            touched: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Number of weight coordinates read or written by gradient steps.
    pub fn touched_coordinates(&self) -> u64 {
        self.touched
    }

    pub fn step_size(&self) -> f64 {
        self.eta0 / (1.0 + self.steps as f64 / self.t0)
    }

    pub fn weight(&self, c: ColumnId) -> f64 {
        self.scale * self.v[c.0]
    }

    pub fn weights(&self) -> Vec<f64> {
        self.v.iter().map(|v| v * self.scale).collect()
    }

    fn check(&self, features: &[(ColumnId, f64)]) -> Result<()> {
        match features.iter().find(|e| e.0 .0 >= self.v.len()) {
            Some(e) => Err(Error::DimensionMismatch {
                expected: self.v.len(),
                found: e.0 .0 + 1,
            }),
            None => Ok(()),
        }
    }

    pub fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        self.check(features)?;
        Ok(self.scale * features.iter().map(|&(c, x)| self.v[c.0] * x).sum::<f64>())
    }

    /// One step on the per-sample loss `(y − wᵀφ)² + (δ²/N)‖w‖²`.
    pub fn sgd_step(&mut self, features: &[(ColumnId, f64)], y: f64) -> Result<()> {
        let prediction = self.predict(features)?;
        let eta = self.step_size();
        let g = -2.0 * (y - prediction);
        self.scale *= 1.0 - 2.0 * eta * self.reg;
        let k = eta * g / self.scale;
        for &(c, x) in features {
            self.v[c.0] -= k * x;
        }
        self.steps += 1;
        self.touched += features.len() as u64;
        if self.scale < RESCALE_BELOW {
            for v in &mut self.v {
                *v *= self.scale;
            }
            self.scale = 1.0;
        }
        Ok(())
    }

    /// One pass over `rows` in a random order drawn from `rng`.
    pub fn epoch<R: Rng + ?Sized>(&mut self, rows: &[Vec<(ColumnId, f64)>], y: &[f64], rng: &mut R) -> Result<()> {
        let mut order: Vec<usize> = (0..rows.len()).collect();
        order.shuffle(rng);
        for i in order {
            self.sgd_step(&rows[i], y[i])?;
        }
        Ok(())
    }

    /// Replace the split column by two copies of its weight; indexer column
    /// ids are append-only, so the children must be the next two ids.
    pub fn reinit_on_cut(&mut self, delta: &ColumnDelta) -> Result<()> {
        let n = self.v.len();
        if delta.retired.0 >= n || delta.left.0 .0 != n || delta.right.0 .0 != n + 1 {
            return Err(Error::InvalidParameter("cut event does not match the model's columns".into()));
        }
        let w = self.v[delta.retired.0];
        self.v[delta.retired.0] = 0.0;
        self.v.push(w);
        self.v.push(w);
        Ok(())
    }

    /// Zero weights for `k` newly created columns.
    pub fn pad_for_new_point(&mut self, k: usize) {
        self.v.resize(self.v.len() + k, 0.0);
    }

    /// `Σ(y − ŷ)² + δ²‖w‖²`.
    pub fn objective(&self, rows: &[Vec<(ColumnId, f64)>], y: &[f64], delta2: f64) -> Result<f64> {
        let mut loss = 0.0;
        for (r, t) in rows.iter().zip(y) {
            let e = t - self.predict(r)?;
            loss += e * e;
        }
        let w2: f64 = self.v.iter().map(|v| v * v).sum::<f64>() * self.scale * self.scale;
        Ok(loss + delta2 * w2)
    }
}
