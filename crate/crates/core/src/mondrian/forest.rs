use std::cmp::Ordering;

use super::aabb::AxisAlignedBox;
use super::tree::{MondrianTree, NodeId};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng, StreamRng};

/// The appearance of a cut splitting leaf `parent` of tree `tree`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutEvent {
    pub time: f64,
    pub tree: usize,
    pub parent: NodeId,
    pub children: (NodeId, NodeId),
}

impl CutEvent {
    fn order(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.tree.cmp(&other.tree))
            .then(self.parent.cmp(&other.parent))
    }
}

/// All cuts up to `until` of the given trees, merged into one stream ordered
/// by time, ties broken by tree index and then parent leaf.
pub fn cut_events(trees: &[MondrianTree], until: f64) -> Vec<CutEvent> {
    let mut events: Vec<CutEvent> = trees
        .iter()
        .enumerate()
        .flat_map(|(m, t)| {
            t.cuts_until(until).map(move |(id, c)| CutEvent {
                time: c.time,
                tree: m,
                parent: id,
                children: (c.left, c.right),
            })
        })
        .collect();
    events.sort_by(|a, b| a.order(b));
    events
}

/// `M` independent Mondrian samples sharing a terminal lifetime.
#[derive(Clone, Debug)]
pub struct Forest {
    trees: Vec<MondrianTree>,
    extension_rngs: Vec<StreamRng>,
}

impl Forest {
    fn from_seeded<F>(n_trees: usize, seed: u64, mut sample: F) -> Result<Self>
    where
        F: FnMut(u64) -> Result<MondrianTree>,
    {
        if n_trees == 0 {
            return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
        }
        let seeds: Vec<u64> = (0..n_trees as u64).map(|m| derive_seed(seed, m)).collect();
        let trees = seeds.iter().map(|&s| sample(s)).collect::<Result<Vec<_>>>()?;
        let extension_rngs = seeds.iter().map(|&s| stream_rng(s, 2)).collect();
        Ok(Self {
            trees,
            extension_rngs,
        })
    }

    pub fn sample_on_box(domain: &AxisAlignedBox, n_trees: usize, lifetime: f64, seed: u64) -> Result<Self> {
        Self::from_seeded(n_trees, seed, |s| MondrianTree::sample(domain, lifetime, s))
    }

    pub fn sample_on_points<P: AsRef<[f64]>>(points: &[P], n_trees: usize, lifetime: f64, seed: u64) -> Result<Self> {
        Self::from_seeded(n_trees, seed, |s| MondrianTree::sample_on_points(points, lifetime, s))
    }

    /// Wrap existing trees; extension randomness comes from each tree's seed.
    pub fn from_trees(trees: Vec<MondrianTree>) -> Result<Self> {
        let Some(first) = trees.first() else {
            return Err(Error::InvalidParameter("a forest needs at least one tree".into()));
        };
        if let Some(t) = trees.iter().find(|t| t.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: t.dim(),
            });
        }
        let extension_rngs = trees.iter().map(|t| stream_rng(t.seed(), 2)).collect();
        Ok(Self { trees, extension_rngs })
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn trees(&self) -> &[MondrianTree] {
        &self.trees
    }

    pub fn tree(&self, m: usize) -> &MondrianTree {
        &self.trees[m]
    }

    pub fn dim(&self) -> usize {
        self.trees[0].dim()
    }

    /// Smallest terminal lifetime among the trees.
    pub fn lifetime(&self) -> f64 {
        self.trees
            .iter()
            .map(|t| t.lifetime())
            .fold(f64::INFINITY, f64::min)
    }

    /// Extend every tree to cover `x`; returns the leaf of `x` in each tree.
    pub fn extend_to_point(&mut self, x: &[f64]) -> Result<Vec<NodeId>> {
        self.trees
            .iter_mut()
            .zip(self.extension_rngs.iter_mut())
            .map(|(t, rng)| t.extend_to_point(x, rng))
            .collect()
    }

    pub fn extend_to_points<P: AsRef<[f64]>>(&mut self, points: &[P]) -> Result<()> {
        for p in points {
            self.extend_to_point(p.as_ref())?;
        }
        Ok(())
    }

    pub fn cut_events(&self, until: f64) -> Vec<CutEvent> {
        cut_events(&self.trees, until)
    }

    /// Total number of cells over all trees at `lifetime`.
    pub fn cell_count(&self, lifetime: f64) -> usize {
        self.trees.iter().map(|t| t.cell_count(lifetime)).sum()
    }
}
