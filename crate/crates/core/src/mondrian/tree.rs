use rand::Rng;
use serde::{Deserialize, Serialize};

use super::aabb::AxisAlignedBox;
use super::clock::{ring_time, uniform_open, winning_clock};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Index of a node inside one tree's arena. Stable for the lifetime of the
/// tree: extension only appends nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

/// A cut `x_d = location` that appeared at `time`. Points with
/// `x_d <= location` belong to `left`.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub time: f64,
    pub dimension: usize,
    pub location: f64,
    pub left: NodeId,
    pub right: NodeId,
}

/// One cell of the hierarchical partition.
///
/// `extent` is the region on which the process has been instantiated for this
/// cell. For trees sampled on a box it is the whole cell; for trees sampled on
/// data points it is the bounding box of the points seen so far, and the rest
/// of the cell is filled in lazily by extension.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub(crate) extent: AxisAlignedBox,
    pub(crate) start: f64,
    pub(crate) parent: Option<NodeId>,
    pub(crate) cut: Option<Cut>,
}

impl Node {
    pub fn extent(&self) -> &AxisAlignedBox {
        &self.extent
    }

    /// Time at which this cell came into existence (its parent's cut time).
    pub fn start_time(&self) -> f64 {
        self.start
    }

    pub fn parent(&self) -> Option<NodeId> {
        self.parent
    }

    pub fn cut(&self) -> Option<&Cut> {
        self.cut.as_ref()
    }

    pub fn is_leaf(&self) -> bool {
        self.cut.is_none()
    }
}

/// A Mondrian process sample stopped at `lifetime`, stored as a strictly
/// binary tree of cuts.
#[derive(Clone, Debug, PartialEq)]
pub struct MondrianTree {
    pub(crate) nodes: Vec<Node>,
    pub(crate) root: NodeId,
    pub(crate) lifetime: f64,
    pub(crate) seed: u64,
}

pub(crate) fn check_lifetime(lifetime: f64) -> Result<()> {
    if lifetime.is_finite() && lifetime >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidLifetime(lifetime))
    }
}

impl MondrianTree {
    /// Sample a Mondrian process on `domain` up to `lifetime`.
    pub fn sample(domain: &AxisAlignedBox, lifetime: f64, seed: u64) -> Result<Self> {
        check_lifetime(lifetime)?;
        let mut rng = stream_rng(seed, 0);
        let mut tree = Self::empty(lifetime, seed);
        tree.root = tree.grow_box(domain.clone(), 0.0, None, &mut rng);
        Ok(tree)
    }

    /// Sample a Mondrian process restricted to the given points: every cell is
    /// instantiated on the bounding box of the points it holds, so only cuts
    /// that separate points are generated. Regions outside those boxes are
    /// sampled on demand by [`MondrianTree::extend_to_point`].
    pub fn sample_on_points<P: AsRef<[f64]>>(points: &[P], lifetime: f64, seed: u64) -> Result<Self> {
        check_lifetime(lifetime)?;
        let first = points
            .first()
            .ok_or_else(|| Error::InvalidParameter("cannot sample a tree on zero points".into()))?;
        let dim = first.as_ref().len();
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("point coordinate".into()));
            }
        }
        let mut rng = stream_rng(seed, 0);
        let mut tree = Self::empty(lifetime, seed);
        let refs: Vec<&[f64]> = points.iter().map(|p| p.as_ref()).collect();
        let indices: Vec<usize> = (0..refs.len()).collect();
        tree.root = tree.grow_points(&refs, indices, 0.0, None, &mut rng);
        Ok(tree)
    }

    fn empty(lifetime: f64, seed: u64) -> Self {
        Self {
            nodes: Vec::new(),
            root: NodeId(0),
            lifetime,
            seed,
        }
    }

    pub(crate) fn push(&mut self, node: Node) -> NodeId {
        self.nodes.push(node);
        NodeId(self.nodes.len() - 1)
    }

    /// Grow a fresh Mondrian on `extent`, starting at time `start`.
    pub(crate) fn grow_box<R: Rng + ?Sized>(
        &mut self,
        extent: AxisAlignedBox,
        start: f64,
        parent: Option<NodeId>,
        rng: &mut R,
    ) -> NodeId {
        let time = start + ring_time(extent.linear_dimension(), rng);
        if time > self.lifetime {
            return self.push(Node {
                extent,
                start,
                parent,
                cut: None,
            });
        }
        let sides: Vec<f64> = (0..extent.dim()).map(|d| extent.side(d)).collect();
        let dimension = winning_clock(&sides, rng);
        let location = uniform_open(extent.lower()[dimension], extent.upper()[dimension], rng);
        let (lo, hi) = extent.split(dimension, location);
        let id = self.push(Node {
            extent,
            start,
            parent,
            cut: None,
        });
        let left = self.grow_box(lo, time, Some(id), rng);
        let right = self.grow_box(hi, time, Some(id), rng);
        self.nodes[id.0].cut = Some(Cut {
            time,
            dimension,
            location,
            left,
            right,
        });
        id
    }

    fn grow_points<R: Rng + ?Sized>(
        &mut self,
        points: &[&[f64]],
        indices: Vec<usize>,
        start: f64,
        parent: Option<NodeId>,
        rng: &mut R,
    ) -> NodeId {
        let extent = AxisAlignedBox::bounding(indices.iter().map(|&i| points[i]))
            .expect("cells are never empty");
        let time = start + ring_time(extent.linear_dimension(), rng);
        if time > self.lifetime {
            return self.push(Node {
                extent,
                start,
                parent,
                cut: None,
            });
        }
        let sides: Vec<f64> = (0..extent.dim()).map(|d| extent.side(d)).collect();
        let dimension = winning_clock(&sides, rng);
        let location = uniform_open(extent.lower()[dimension], extent.upper()[dimension], rng);
        let (lo, hi): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| points[i][dimension] <= location);
        let id = self.push(Node {
            extent,
            start,
            parent,
            cut: None,
        });
        let left = self.grow_points(points, lo, time, Some(id), rng);
        let right = self.grow_points(points, hi, time, Some(id), rng);
        self.nodes[id.0].cut = Some(Cut {
            time,
            dimension,
            location,
            left,
            right,
        });
        id
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_box(&self) -> &AxisAlignedBox {
        &self.nodes[self.root.0].extent
    }

    pub fn dim(&self) -> usize {
        self.root_box().dim()
    }

    /// Terminal lifetime: no cut of this tree appears after it.
    pub fn lifetime(&self) -> f64 {
        self.lifetime
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    /// Internal nodes whose cut appeared no later than `lifetime`.
    pub fn cuts_until(&self, lifetime: f64) -> impl Iterator<Item = (NodeId, &Cut)> {
        self.nodes
            .iter()
            .enumerate()
            .filter_map(move |(i, n)| match &n.cut {
                Some(c) if c.time <= lifetime => Some((NodeId(i), c)),
                _ => None,
            })
    }

    pub fn cut_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.cut.is_some()).count()
    }

    /// Number of cells of the partition at `lifetime`.
    pub fn cell_count(&self, lifetime: f64) -> usize {
        1 + self.cuts_until(lifetime).count()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.cut.is_none()).count()
    }

    /// Child of internal node `id` on the side of `x`.
    pub(crate) fn child_towards(&self, cut: &Cut, x: &[f64]) -> NodeId {
        if x[cut.dimension] <= cut.location {
            cut.left
        } else {
            cut.right
        }
    }

    /// Label of the cell containing `x` in the partition at `lifetime`.
    ///
    /// Fails with [`Error::ExtensionRequired`] when answering would need parts
    /// of the process that have not been sampled yet.
    pub fn cell_lookup(&self, x: &[f64], lifetime: f64) -> Result<NodeId> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if lifetime > self.lifetime {
            return Err(Error::LifetimeBeyondTerminal {
                requested: lifetime,
                terminal: self.lifetime,
            });
        }
        let mut id = self.root;
        loop {
            let node = &self.nodes[id.0];
            if node.start < lifetime && !node.extent.contains_point(x) {
                return Err(Error::ExtensionRequired);
            }
            match &node.cut {
                Some(cut) if cut.time <= lifetime => id = self.child_towards(cut, x),
                _ => return Ok(id),
            }
        }
    }

    /// Nodes of the subtree rooted at `id`, in pre-order.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Some(c) = &self.nodes[n.0].cut {
                stack.push(c.right);
                stack.push(c.left);
            }
        }
        out
    }

    /// Cuts in pre-order as `(time, dimension, location)` triples.
    pub fn cut_records(&self) -> Vec<(f64, usize, f64)> {
        self.subtree(self.root)
            .into_iter()
            .filter_map(|id| {
                self.nodes[id.0]
                    .cut
                    .as_ref()
                    .map(|c| (c.time, c.dimension, c.location))
            })
            .collect()
    }

    /// Time of the first cut, or infinity for a tree without cuts.
    pub fn first_cut(&self) -> Option<&Cut> {
        self.nodes[self.root.0].cut.as_ref()
    }
}
