//! Mondrian forest regression on the same partitions: each tree fits its own
//! leaf values by ridge regression and predictions are averaged over trees.
//!
//! A tree's design has one indicator per row, so its normal equations are
//! diagonal and the leaf values are shrunken cell means `Σy / (|c| + γ²)`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::features::{ColumnDelta, ColumnId, FeatureIndexer};
use crate::sweep::{SweepContext, SweepLearner};

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    gamma2: f64,
    trees: usize,
    /// Leaf values `w^(m)` in per-tree units, keyed by column.
    leaves: HashMap<ColumnId, f64>,
}

fn check_gamma2(gamma2: f64) -> Result<()> {
    if gamma2 > 0.0 && gamma2.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("γ² must be positive, got {gamma2}")))
    }
}

/// Fit every tree independently on the first `y.len()` rows of the indexer.
pub fn fit_forest(indexer: &FeatureIndexer, y: &[f64], gamma2: f64) -> Result<ForestModel> {
    check_gamma2(gamma2)?;
    if y.len() > indexer.point_count() {
        return Err(Error::DimensionMismatch {
            expected: indexer.point_count(),
            found: y.len(),
        });
    }
    let mut leaves = HashMap::new();
    for c in indexer.live_columns() {
        let (sum, count) = indexer
            .column(c)
            .rows
            .iter()
            .filter(|&&r| r < y.len())
            .fold((0.0, 0usize), |(s, n), &r| (s + y[r], n + 1));
        leaves.insert(c, sum / (count as f64 + gamma2));
    }
    Ok(ForestModel {
        gamma2,
        trees: indexer.trees(),
        leaves,
    })
}

impl ForestModel {
    pub fn gamma2(&self) -> f64 {
        self.gamma2
    }

    pub fn trees(&self) -> usize {
        self.trees
    }

    pub fn leaf_value(&self, c: ColumnId) -> f64 {
        self.leaves.get(&c).copied().unwrap_or(0.0)
    }

    pub fn leaf_values(&self) -> Vec<f64> {
        let mut keys: Vec<&ColumnId> = self.leaves.keys().collect();
        keys.sort_unstable();
        keys.into_iter().map(|k| self.leaves[k]).collect()
    }

    /// Prediction of each tree for a point in the given cells (one per tree).
    pub fn per_tree(&self, cells: &[ColumnId]) -> Vec<f64> {
        cells.iter().map(|&c| self.leaf_value(c)).collect()
    }

    /// Average of the tree predictions. Trees in which the point falls in a
    /// cell without a column contribute zero.
    pub fn predict(&self, cells: &[ColumnId]) -> f64 {
        cells.iter().map(|&c| self.leaf_value(c)).sum::<f64>() / self.trees as f64
    }

    /// The same model as a weight vector on the normalized features,
    /// `w = M^{-1/2} [w^(1); …; w^(M)]`.
    pub fn concatenated_weights(&self) -> HashMap<ColumnId, f64> {
        let s = (self.trees as f64).powf(-0.5);
        self.leaves.iter().map(|(&c, &w)| (c, s * w)).collect()
    }
}

/// The two training objectives, each evaluated at both weight vectors, plus
/// the facts relating them.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveReport {
    pub kernel_at_kernel: f64,
    pub kernel_at_forest: f64,
    pub forest_at_kernel: f64,
    pub forest_at_forest: f64,
    /// `|Σ_m O_m / M − forest objective|` at the forest weights, where `O_m`
    /// is the ridge objective of tree `m` alone.
    pub average_identity_error: f64,
    /// Per-point `loss(y, mean ŷ^(m)) ≤ mean loss(y, ŷ^(m))` at both weights.
    pub jensen_holds: bool,
}

struct Objectives {
    kernel: f64,
    forest: f64,
    jensen: bool,
}

/// Kernel objective `Σ loss(y, mean_m ŷ^(m)) + δ²‖w‖²` and forest objective
/// `Σ mean_m loss(y, ŷ^(m)) + γ²‖w‖²` at normalized weights `w`, with
/// `ŷ^(m) = √M · w[cell_m]`.
fn objectives(w: &HashMap<ColumnId, f64>, cells: &[Vec<ColumnId>], y: &[f64], reg: f64, trees: usize) -> Objectives {
    let root_m = (trees as f64).sqrt();
    let mut kernel_loss = 0.0;
    let mut forest_loss = 0.0;
    let mut jensen = true;
    for (row, &t) in cells.iter().zip(y) {
        let preds: Vec<f64> = row.iter().map(|c| root_m * w.get(c).copied().unwrap_or(0.0)).collect();
        let mean = preds.iter().sum::<f64>() / trees as f64;
        let joint = (t - mean) * (t - mean);
        let separate = preds.iter().map(|p| (t - p) * (t - p)).sum::<f64>() / trees as f64;
        jensen &= joint <= separate + 1e-12 * separate.max(1.0);
        kernel_loss += joint;
        forest_loss += separate;
    }
    let w2: f64 = w.values().map(|v| v * v).sum();
    Objectives {
        kernel: kernel_loss + reg * w2,
        forest: forest_loss + reg * w2,
        jensen,
    }
}

/// Compare the kernel ridge weights (on normalized features) with a forest.
/// `cells[n]` lists the column of training row `n` in every tree.
pub fn compare_objectives(
    kernel_weights: &HashMap<ColumnId, f64>,
    forest: &ForestModel,
    cells: &[Vec<ColumnId>],
    y: &[f64],
    delta2: f64,
) -> Result<ObjectiveReport> {
    if cells.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: cells.len(),
            found: y.len(),
        });
    }
    let m = forest.trees;
    let fw = forest.concatenated_weights();
    let at_kernel = objectives(kernel_weights, cells, y, delta2, m);
    let at_forest = objectives(&fw, cells, y, forest.gamma2, m);
    let kernel_at_forest = objectives(&fw, cells, y, delta2, m).kernel;
    let forest_at_kernel = objectives(kernel_weights, cells, y, forest.gamma2, m).forest;

    let mut per_tree = vec![0.0; m];
    for (row, &t) in cells.iter().zip(y) {
        for (k, &c) in row.iter().enumerate() {
            let e = t - forest.leaf_value(c);
            per_tree[k] += e * e;
        }
    }
    let mut tree_of: HashMap<ColumnId, usize> = HashMap::new();
    for row in cells {
        for (k, &c) in row.iter().enumerate() {
            tree_of.insert(c, k);
        }
    }
    for (c, w) in &forest.leaves {
        if let Some(&k) = tree_of.get(c) {
            per_tree[k] += forest.gamma2 * w * w;
        }
    }
    let average = per_tree.iter().sum::<f64>() / m as f64;
    // leaves without training rows have zero value and add nothing
    Ok(ObjectiveReport {
        kernel_at_kernel: at_kernel.kernel,
        kernel_at_forest,
        forest_at_kernel,
        forest_at_forest: at_forest.forest,
        average_identity_error: (average - at_forest.forest).abs(),
        jensen_holds: at_kernel.jensen && at_forest.jensen,
    })
}

/// Forest fitted alongside a sweep: leaf sums and counts are updated only
/// for the two cells created by each cut.
#[derive(Clone, Debug)]
pub struct ForestLearner {
    gamma2: f64,
    trees: usize,
    cells: HashMap<ColumnId, (f64, usize)>,
}

impl ForestLearner {
    pub fn new(gamma2: f64) -> Result<Self> {
        check_gamma2(gamma2)?;
        Ok(Self {
            gamma2,
            trees: 0,
            cells: HashMap::new(),
        })
    }

    fn insert(&mut self, c: ColumnId, rows: &[usize], ctx: &SweepContext) {
        let (s, n) = rows
            .iter()
            .filter(|&&r| r < ctx.n_train)
            .fold((0.0, 0usize), |(s, n), &r| (s + ctx.train_y[r], n + 1));
        self.cells.insert(c, (s, n));
    }

    pub fn model(&self) -> ForestModel {
        ForestModel {
            gamma2: self.gamma2,
            trees: self.trees,
            leaves: self
                .cells
                .iter()
                .map(|(&c, &(s, n))| (c, s / (n as f64 + self.gamma2)))
                .collect(),
        }
    }
}

impl SweepLearner for ForestLearner {
    fn init(&mut self, ctx: &SweepContext) -> Result<()> {
        self.trees = ctx.indexer.trees();
        self.cells.clear();
        for c in ctx.indexer.live_columns() {
            let rows = ctx.indexer.column(c).rows.clone();
            self.insert(c, &rows, ctx);
        }
        Ok(())
    }

    fn on_cut(&mut self, delta: &ColumnDelta, ctx: &SweepContext) -> Result<()> {
        self.cells.remove(&delta.retired).ok_or(Error::UnknownColumn(delta.retired))?;
        self.insert(delta.left.0, &delta.left.1, ctx);
        self.insert(delta.right.0, &delta.right.1, ctx);
        Ok(())
    }

    fn predict(&self, features: &[(ColumnId, f64)]) -> Result<f64> {
        let total: f64 = features
            .iter()
            .map(|(c, _)| {
                self.cells
                    .get(c)
                    .map_or(0.0, |&(s, n)| s / (n as f64 + self.gamma2))
            })
            .sum();
        Ok(total / self.trees as f64)
    }
}

/// Histogram of weights over `bins` equal bins spanning `[-r, r]`, with `r`
/// the largest absolute weight. Returns `(lower, upper, count)` per bin.
pub fn weight_histogram(weights: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let bins = bins.max(1);
    let r = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    let r = if r > 0.0 { r } else { 1.0 };
    let width = 2.0 * r / bins as f64;
    let mut counts = vec![0usize; bins];
    for w in weights {
        let k = (((w + r) / width).floor() as isize).clamp(0, bins as isize - 1);
        counts[k as usize] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, n)| (-r + k as f64 * width, -r + (k + 1) as f64 * width, n))
        .collect()
}

pub fn histogram_csv(hist: &[(f64, f64, usize)]) -> String {
    let mut out = String::from("lower,upper,count\n");
    for (lo, hi, n) in hist {
        writeln!(out, "{lo:?},{hi:?},{n}").unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_is_symmetric_and_complete() {
        let w = [-2.0, -0.5, 0.0, 0.1, 2.0];
        let h = weight_histogram(&w, 101);
        assert_eq!(h.len(), 101);
        assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), 5);
        assert_eq!(h[0].0, -2.0);
        assert!((h[100].1 - 2.0).abs() < 1e-12);
        assert_eq!(h[50].2, 1);
        assert_eq!(h[53].2, 1);
        assert_eq!(weight_histogram(&[0.0, 0.0], 101)[50].2, 2);
    }

    #[test]
    fn rejects_bad_regularizer() {
        assert!(ForestLearner::new(0.0).is_err());
    }
}
