//! Sparse Mondrian feature map and the bookkeeping that keeps it in sync with
//! cut events and newly arriving points.
//!
//! Every indexed point has one nonzero per tree, equal to `M^{-1/2}`, at the
//! column of the cell that holds it. Column ids are append-only: a cut retires
//! the column of the split cell and appends one column per child.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mondrian::{CutEvent, Forest, MondrianTree, NodeId};

/// Stable external column identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ColumnId(pub usize);

/// Feature vector of an indexed point: entry `m` belongs to tree `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseFeatureVector {
    entries: Vec<(ColumnId, f64)>,
}

impl SparseFeatureVector {
    pub fn new(entries: Vec<(ColumnId, f64)>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[(ColumnId, f64)] {
        &self.entries
    }

    pub fn trees(&self) -> usize {
        self.entries.len()
    }

    pub fn columns(&self) -> impl Iterator<Item = ColumnId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Inner product with a vector from the same indexer.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        if self.trees() != other.trees() {
            return Err(Error::IndexerMismatch);
        }
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .filter(|(a, b)| a.0 == b.0)
            .map(|(a, b)| a.1 * b.1)
            .sum())
    }
}

/// Rows of feature vectors with `columns` as an upper bound on the column ids.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub rows: Vec<SparseFeatureVector>,
    pub columns: usize,
}

impl SparseMatrix {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// `(ΦΦᵀ)[i][j]`.
    pub fn gram(&self, i: usize, j: usize) -> f64 {
        self.rows[i].dot(&self.rows[j]).expect("rows of one matrix share the indexer")
    }

    /// Coordinate text format, one `row col value` triple per line.
    pub fn to_coo(&self) -> String {
        let mut out = String::new();
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row.entries() {
                writeln!(out, "{} {} {:e}", r, c.0, v).unwrap();
            }
        }
        out
    }

    pub fn from_coo(text: &str) -> Result<Vec<(usize, usize, f64)>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                let bad = |m: &str| Error::Parse {
                    path: "<coo>".into(),
                    line: i + 1,
                    message: m.to_string(),
                };
                let f: Vec<&str> = l.split_whitespace().collect();
                if f.len() != 3 {
                    return Err(bad("expected three fields"));
                }
                Ok((
                    f[0].parse().map_err(|_| bad("bad row"))?,
                    f[1].parse().map_err(|_| bad("bad column"))?,
                    f[2].parse().map_err(|_| bad("bad value"))?,
                ))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnRecord {
    pub tree: usize,
    pub node: NodeId,
    pub rows: Vec<usize>,
    pub created: f64,
    pub retired: Option<f64>,
}

/// Outcome of one cut: the retired column and the two appended columns with
/// the rows that moved into each.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDelta {
    pub tree: usize,
    pub time: f64,
    pub retired: ColumnId,
    pub left: (ColumnId, Vec<usize>),
    pub right: (ColumnId, Vec<usize>),
}

/// Map from the cells of a forest at the current lifetime to columns of the
/// feature map, together with the indexed points.
#[derive(Clone, Debug)]
pub struct FeatureIndexer {
    lifetime: f64,
    normalizer: f64,
    columns: Vec<ColumnRecord>,
    keys: Vec<HashMap<NodeId, ColumnId>>,
    history: Vec<HashMap<NodeId, ColumnId>>,
    points: Vec<Vec<f64>>,
    point_columns: Vec<Vec<ColumnId>>,
    active: usize,
}

impl FeatureIndexer {
    pub fn new(trees: usize, lifetime: f64) -> Self {
        Self {
            lifetime,
            normalizer: (trees as f64).powf(-0.5),
            columns: Vec::new(),
            keys: vec![HashMap::new(); trees],
            history: vec![HashMap::new(); trees],
            points: Vec::new(),
            point_columns: Vec::new(),
            active: 0,
        }
    }

    /// Index `data` against the partitions of `forest` at `lifetime`.
    pub fn build_features<P: AsRef<[f64]>>(forest: &Forest, lifetime: f64, data: &[P]) -> Result<(Self, SparseMatrix)> {
        let mut indexer = Self::new(forest.len(), lifetime);
        let mut rows = Vec::with_capacity(data.len());
        for x in data {
            rows.push(indexer.add_point(forest, x.as_ref())?.0);
        }
        let columns = indexer.column_id_bound();
        Ok((indexer, SparseMatrix { rows, columns }))
    }

    pub fn trees(&self) -> usize {
        self.keys.len()
    }

    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    /// Number of live columns `C`.
    pub fn column_count(&self) -> usize {
        self.active
    }

    /// One past the largest column id ever handed out.
    pub fn column_id_bound(&self) -> usize {
        self.columns.len()
    }

    pub fn retired_count(&self) -> usize {
        self.columns.len() - self.active
    }

    /// Live columns per tree, `C^(m)`.
    pub fn per_tree_counts(&self) -> Vec<usize> {
        self.keys.iter().map(|k| k.len()).collect()
    }

    pub fn column(&self, id: ColumnId) -> &ColumnRecord {
        &self.columns[id.0]
    }

    /// Live column ids in increasing order.
    pub fn live_columns(&self) -> Vec<ColumnId> {
        (0..self.columns.len())
            .filter(|&i| self.columns[i].retired.is_none())
            .map(ColumnId)
            .collect()
    }

    pub fn column_of(&self, tree: usize, node: NodeId) -> Option<ColumnId> {
        self.keys.get(tree)?.get(&node).copied()
    }

    pub fn is_indexed(&self, tree: usize, node: NodeId) -> bool {
        self.column_of(tree, node).is_some()
    }

    /// Column that was assigned to `node` at any time, live or retired.
    pub fn column_ever(&self, tree: usize, node: NodeId) -> Option<ColumnId> {
        self.history.get(tree)?.get(&node).copied()
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    pub fn point(&self, row: usize) -> &[f64] {
        &self.points[row]
    }

    pub fn row_columns(&self, row: usize) -> &[ColumnId] {
        &self.point_columns[row]
    }

    pub fn row_vector(&self, row: usize) -> SparseFeatureVector {
        SparseFeatureVector::new(self.point_columns[row].iter().map(|&c| (c, self.normalizer)).collect())
    }

    pub fn matrix(&self) -> SparseMatrix {
        SparseMatrix {
            rows: (0..self.points.len()).map(|r| self.row_vector(r)).collect(),
            columns: self.column_id_bound(),
        }
    }

    fn new_column(&mut self, tree: usize, node: NodeId, rows: Vec<usize>, created: f64) -> ColumnId {
        let id = ColumnId(self.columns.len());
        self.columns.push(ColumnRecord {
            tree,
            node,
            rows,
            created,
            retired: None,
        });
        self.keys[tree].insert(node, id);
        self.history[tree].insert(node, id);
        self.active += 1;
        id
    }

    /// Column for the cell `node` of tree `m` at the current lifetime,
    /// creating one if necessary. When extension has inserted a new node
    /// above an indexed cell without yet cutting it, the existing column is
    /// moved to the new node.
    fn column_for_cell(&mut self, m: usize, tree: &MondrianTree, node: NodeId) -> Result<(ColumnId, bool)> {
        if let Some(c) = self.column_of(m, node) {
            return Ok((c, false));
        }
        let keyed: Vec<NodeId> = tree
            .subtree(node)
            .into_iter()
            .skip(1)
            .filter(|n| self.keys[m].contains_key(n))
            .collect();
        match keyed.as_slice() {
            [] => Ok((self.new_column(m, node, Vec::new(), self.lifetime), true)),
            [old] => {
                let c = self.keys[m].remove(old).expect("key exists");
                self.keys[m].insert(node, c);
                self.history[m].insert(node, c);
                self.columns[c.0].node = node;
                Ok((c, false))
            }
            _ => Err(Error::Numerical(format!(
                "cell {:?} of tree {m} covers several indexed cells",
                node
            ))),
        }
    }

    /// Index one more point. The trees must already cover `x` (see
    /// [`Forest::extend_to_point`]). Returns its feature vector and the number
    /// of columns that had to be created for it.
    pub fn add_point(&mut self, forest: &Forest, x: &[f64]) -> Result<(SparseFeatureVector, usize)> {
        if forest.len() != self.trees() {
            return Err(Error::IndexerMismatch);
        }
        let row = self.points.len();
        let mut cols = Vec::with_capacity(self.trees());
        let mut created = 0;
        for tree in forest.trees() {
            let node = tree.cell_lookup(x, self.lifetime)?;
            cols.push(node);
        }
        let mut ids = Vec::with_capacity(cols.len());
        for (m, node) in cols.into_iter().enumerate() {
            let (c, fresh) = self.column_for_cell(m, forest.tree(m), node)?;
            created += fresh as usize;
            self.columns[c.0].rows.push(row);
            ids.push(c);
        }
        self.points.push(x.to_vec());
        self.point_columns.push(ids);
        Ok((self.row_vector(row), created))
    }

    /// Extend the forest to `x`, then index it.
    pub fn extend_and_add(&mut self, forest: &mut Forest, x: &[f64]) -> Result<(SparseFeatureVector, usize)> {
        forest.extend_to_point(x)?;
        self.add_point(forest, x)
    }

    /// Split the column of the event's parent cell into its two children.
    pub fn apply_cut(&mut self, forest: &Forest, event: &CutEvent) -> Result<ColumnDelta> {
        if event.tree >= self.trees() {
            return Err(Error::IndexerMismatch);
        }
        if event.time < self.lifetime {
            return Err(Error::InvalidParameter(format!(
                "cut at {} precedes the indexer lifetime {}",
                event.time, self.lifetime
            )));
        }
        let m = event.tree;
        let retired = self.column_of(m, event.parent).ok_or(Error::UnknownLeaf {
            tree: m,
            node: event.parent,
        })?;
        let cut = forest
            .tree(m)
            .node(event.parent)
            .cut()
            .cloned()
            .ok_or(Error::UnknownLeaf {
                tree: m,
                node: event.parent,
            })?;
        let rows = std::mem::take(&mut self.columns[retired.0].rows);
        let (lo, hi): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&r| self.points[r][cut.dimension] <= cut.location);
        self.columns[retired.0].rows = rows;
        self.columns[retired.0].retired = Some(event.time);
        self.keys[m].remove(&event.parent);
        self.active -= 1;
        self.lifetime = event.time;
        let left = self.new_column(m, cut.left, lo.clone(), event.time);
        let right = self.new_column(m, cut.right, hi.clone(), event.time);
        for &r in &lo {
            self.point_columns[r][m] = left;
        }
        for &r in &hi {
            self.point_columns[r][m] = right;
        }
        Ok(ColumnDelta {
            tree: m,
            time: event.time,
            retired,
            left: (left, lo),
            right: (right, hi),
        })
    }

    /// Advance the lifetime without a cut (only valid up to the next event).
    pub fn set_lifetime(&mut self, lifetime: f64) {
        self.lifetime = lifetime;
    }

    /// Features of a point that is not indexed: entries only for trees where
    /// it lands in an indexed cell. The trees must cover `x`.
    pub fn lookup(&self, forest: &Forest, x: &[f64]) -> Result<Vec<(ColumnId, f64)>> {
        self.lookup_at(forest, x, self.lifetime, false)
    }

    /// Features of `x` at an earlier lifetime of this indexer's history.
    pub fn lookup_at(&self, forest: &Forest, x: &[f64], lifetime: f64, historic: bool) -> Result<Vec<(ColumnId, f64)>> {
        let mut out = Vec::with_capacity(self.trees());
        for (m, tree) in forest.trees().iter().enumerate() {
            let node = tree.cell_lookup(x, lifetime)?;
            let col = if historic {
                self.column_ever(m, node)
            } else {
                self.column_of(m, node)
            };
            if let Some(c) = col {
                out.push((c, self.normalizer));
            }
        }
        Ok(out)
    }

    /// Per-tree partition of the indexed rows into cells, canonicalised so
    /// that two indexers of the same data compare equal regardless of column
    /// numbering.
    pub fn canonical_partition(&self) -> Vec<Vec<Vec<usize>>> {
        let mut out = vec![Vec::new(); self.trees()];
        for rec in self.columns.iter().filter(|r| r.retired.is_none()) {
            let mut rows = rec.rows.clone();
            rows.sort_unstable();
            out[rec.tree].push(rows);
        }
        for cells in &mut out {
            cells.retain(|c| !c.is_empty());
            cells.sort();
        }
        out
    }
}
