//! Primal ridge regression over sparse features with an incrementally
//! maintained Cholesky factor of `A = ΦᵀΦ + δ²I`.
//!
//! Columns are addressed by their external [`ColumnId`]; the position of a
//! column inside the factor is internal and changes when earlier columns are
//! removed.

use std::collections::HashMap;

use crate::cholesky::CholeskyFactor;
use crate::error::{Error, Result};
use crate::features::ColumnId;

/// Sparse column data: `(row, value)` pairs.
pub type ColumnData = Vec<(usize, f64)>;

const GUARD_RATIO: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct RidgeState {
    delta2: f64,
    factor: CholeskyFactor,
    ids: Vec<ColumnId>,
    position: HashMap<ColumnId, usize>,
    col_rows: Vec<ColumnData>,
    row_entries: Vec<Vec<(ColumnId, f64)>>,
    y: Vec<f64>,
    phi_t_y: Vec<f64>,
    weights: Vec<f64>,
    log_det: f64,
    rebuilds: usize,
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

impl RidgeState {
    /// Fit on `rows` (one sparse feature row per target) with the given
    /// column set; columns without data are allowed.
    pub fn fit(rows: &[Vec<(ColumnId, f64)>], y: &[f64], columns: &[ColumnId], delta2: f64) -> Result<Self> {
        if !(delta2 > 0.0 && delta2.is_finite()) {
            return Err(Error::InvalidParameter(format!("ridge δ² must be positive, got {delta2}")));
        }
        if rows.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: y.len(),
            });
        }
        check_finite(y.iter().copied(), "target")?;
        check_finite(rows.iter().flatten().map(|e| e.1), "feature value")?;
        let mut state = Self {
            delta2,
            factor: CholeskyFactor::empty(),
            ids: columns.to_vec(),
            position: columns.iter().enumerate().map(|(p, &c)| (c, p)).collect(),
            col_rows: vec![Vec::new(); columns.len()],
            row_entries: rows.to_vec(),
            y: y.to_vec(),
            phi_t_y: vec![0.0; columns.len()],
            weights: Vec::new(),
            log_det: 0.0,
            rebuilds: 0,
        };
        if state.position.len() != columns.len() {
            return Err(Error::InvalidParameter("duplicate column id".into()));
        }
        for (r, row) in rows.iter().enumerate() {
            for &(c, v) in row {
                let p = *state.position.get(&c).ok_or(Error::UnknownColumn(c))?;
                state.col_rows[p].push((r, v));
                state.phi_t_y[p] += v * y[r];
            }
        }
        state.factorize()?;
        state.refresh();
        Ok(state)
    }

    /// Fit using exactly the columns that occur in `rows`, ordered by id.
    pub fn fit_rows(rows: &[Vec<(ColumnId, f64)>], y: &[f64], delta2: f64) -> Result<Self> {
        let mut cols: Vec<ColumnId> = rows.iter().flatten().map(|e| e.0).collect();
        cols.sort_unstable();
        cols.dedup();
        Self::fit(rows, y, &cols, delta2)
    }

    fn dense_a(&self) -> Vec<Vec<f64>> {
        let c = self.ids.len();
        let mut a = vec![vec![0.0; c]; c];
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = self.delta2;
        }
        for entries in &self.row_entries {
            for &(ci, vi) in entries {
                let pi = self.position[&ci];
                for &(cj, vj) in entries {
                    a[pi][self.position[&cj]] += vi * vj;
                }
            }
        }
        a
    }

    fn factorize(&mut self) -> Result<()> {
        self.factor = CholeskyFactor::from_dense(&self.dense_a())?;
        Ok(())
    }

    fn refresh(&mut self) {
        self.weights = self.factor.solve(&self.phi_t_y);
        self.log_det = self.factor.log_det();
    }

    /// Rebuild the factor from the stored data if an update left a pivot
    /// below the guard threshold, then refresh weights and log-determinant.
    fn finish_update(&mut self) -> Result<()> {
        if self.factor.dim() > 0 && !(self.factor.min_diagonal() >= GUARD_RATIO * self.delta2.sqrt()) {
            self.factorize()?;
            self.rebuilds += 1;
        }
        self.refresh();
        Ok(())
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn column_count(&self) -> usize {
        self.ids.len()
    }

    pub fn row_count(&self) -> usize {
        self.y.len()
    }

    pub fn columns(&self) -> &[ColumnId] {
        &self.ids
    }

    pub fn has_column(&self, id: ColumnId) -> bool {
        self.position.contains_key(&id)
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    pub fn rebuild_count(&self) -> usize {
        self.rebuilds
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn weight(&self, id: ColumnId) -> Option<f64> {
        self.position.get(&id).map(|&p| self.weights[p])
    }

    /// `(column, weight)` pairs in internal order.
    pub fn weights(&self) -> Vec<(ColumnId, f64)> {
        self.ids.iter().copied().zip(self.weights.iter().copied()).collect()
    }

    pub fn phi_t_y(&self, id: ColumnId) -> Option<f64> {
        self.position.get(&id).map(|&p| self.phi_t_y[p])
    }

    /// `ΦᵀΦ + δ²I` materialized from the stored rows, in internal order.
    pub fn materialized_a(&self) -> Vec<Vec<f64>> {
        self.dense_a()
    }

    /// Remove column `id`; the remaining columns keep their ids.
    pub fn delete_column(&mut self, id: ColumnId) -> Result<()> {
        self.remove_one(id)?;
        self.finish_update()
    }

    fn remove_one(&mut self, id: ColumnId) -> Result<()> {
        let p = *self.position.get(&id).ok_or(Error::UnknownColumn(id))?;
        self.factor.remove(p)?;
        self.position.remove(&id);
        for &(r, _) in &self.col_rows[p] {
            self.row_entries[r].retain(|e| e.0 != id);
        }
        self.ids.remove(p);
        self.col_rows.remove(p);
        self.phi_t_y.remove(p);
        for (q, c) in self.ids.iter().enumerate().skip(p) {
            self.position.insert(*c, q);
        }
        Ok(())
    }

    fn append_one(&mut self, id: ColumnId, data: &[(usize, f64)]) -> Result<()> {
        if self.position.contains_key(&id) {
            return Err(Error::InvalidParameter(format!("column {} already present", id.0)));
        }
        check_finite(data.iter().map(|e| e.1), "feature value")?;
        let n = self.ids.len();
        let mut a = vec![0.0; n + 1];
        let mut diag = self.delta2;
        let mut pty = 0.0;
        for &(r, v) in data {
            if r >= self.y.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.y.len(),
                    found: r + 1,
                });
            }
            for &(c, w) in &self.row_entries[r] {
                a[self.position[&c]] += v * w;
            }
            diag += v * v;
            pty += v * self.y[r];
        }
        a[n] = diag;
        self.factor.append(&a)?;
        for &(r, v) in data {
            self.row_entries[r].push((id, v));
        }
        self.ids.push(id);
        self.position.insert(id, n);
        self.col_rows.push(data.to_vec());
        self.phi_t_y.push(pty);
        Ok(())
    }

    /// Append new trailing columns given by their sparse data.
    pub fn append_columns(&mut self, columns: &[(ColumnId, ColumnData)]) -> Result<()> {
        for (id, data) in columns {
            self.append_one(*id, data)?;
        }
        self.finish_update()
    }

    /// The cut-event delta: remove `retired`, then append the two children.
    pub fn split_column(&mut self, retired: ColumnId, children: &[(ColumnId, ColumnData)]) -> Result<()> {
        self.remove_one(retired)?;
        for (id, data) in children {
            self.append_one(*id, data)?;
        }
        self.finish_update()
    }

    /// Add one observation `(φ, y)`; all columns of `φ` must exist (append
    /// empty columns for newly created cells first).
    pub fn rank1_data_update(&mut self, features: &[(ColumnId, f64)], y: f64) -> Result<()> {
        check_finite(features.iter().map(|e| e.1).chain([y]), "observation")?;
        let mut x = vec![0.0; self.ids.len()];
        for &(c, v) in features {
            let p = *self.position.get(&c).ok_or(Error::UnknownColumn(c))?;
            x[p] += v;
        }
        self.factor.rank1_update(&x)?;
        let r = self.y.len();
        for &(c, v) in features {
            let p = self.position[&c];
            self.col_rows[p].push((r, v));
            self.phi_t_y[p] += v * y;
        }
        self.row_entries.push(features.to_vec());
        self.y.push(y);
        self.finish_update()
    }

    pub fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        features.iter().try_fold(0.0, |acc, &(c, v)| {
            let p = self.position.get(&c).ok_or(Error::UnknownColumn(c))?;
            Ok(acc + v * self.weights[*p])
        })
    }

    pub fn predict_rows(&self, rows: &[Vec<(ColumnId, f64)>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Posterior predictive variance `δ²(1 + φᵀA⁻¹φ)` under the model with
    /// unit prior weight variance and noise variance `δ²`.
    pub fn predictive_variance(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        let mut z = vec![0.0; self.ids.len()];
        for &(c, v) in features {
            z[*self.position.get(&c).ok_or(Error::UnknownColumn(c))?] += v;
        }
        self.factor.forward_solve(&mut z);
        Ok(self.delta2 * (1.0 + z.iter().map(|v| v * v).sum::<f64>()))
    }

    /// Training fit `Φŵ`, accumulated column by column.
    pub fn fitted(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.y.len()];
        for (w, col) in self.weights.iter().zip(&self.col_rows) {
            for &(r, v) in col {
                out[r] += w * v;
            }
        }
        out
    }

    pub fn residual_sum_of_squares(&self) -> f64 {
        self.fitted()
            .iter()
            .zip(&self.y)
            .map(|(f, y)| (y - f) * (y - f))
            .sum()
    }

    pub fn train_rmse(&self) -> f64 {
        if self.y.is_empty() {
            return 0.0;
        }
        (self.residual_sum_of_squares() / self.y.len() as f64).sqrt()
    }

    /// `Σ(y − ŷ)² + δ²‖w‖²` at the current weights.
    pub fn objective(&self) -> f64 {
        self.residual_sum_of_squares() + self.delta2 * self.weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// Log of the Gaussian evidence `p(y | Φ)` with weight prior `N(0, I)`
    /// and noise variance `δ²`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.y.len() as f64;
        let c = self.ids.len() as f64;
        let w2: f64 = self.weights.iter().map(|w| w * w).sum();
        -self.residual_sum_of_squares() / (2.0 * self.delta2)
            - 0.5 * w2
            - 0.5 * self.log_det
            - 0.5 * (n - c) * self.delta2.ln()
            - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}
