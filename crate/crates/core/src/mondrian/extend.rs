//! Conditional Mondrian: extending a sample on a box to a larger box.
//!
//! At a node whose instantiated extent `A` must grow to `X ⊇ A`, the cuts of
//! the larger process that miss `A` come from a clock of rate `|X| - |A|`. If
//! it rings before the node's own cut (or the terminal lifetime), an outside
//! cut is inserted above the node: the node keeps its subtree on the side that
//! contains `A`, a fresh Mondrian is grown on the other side, and the
//! procedure continues on the node with the reduced box. Otherwise the
//! existing cut stands and both children are extended.

use rand::Rng;

use super::aabb::AxisAlignedBox;
use super::clock::{ring_time, uniform_outside, winning_clock};
use super::tree::{Cut, MondrianTree, Node, NodeId};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

impl MondrianTree {
    /// Extend the sample to `outer`, which must contain the root box. The
    /// restriction of the result to the old root box is unchanged.
    pub fn extend_tree(&self, outer: &AxisAlignedBox, seed: u64) -> Result<Self> {
        if !outer.contains_box(self.root_box()) {
            return Err(Error::NotContained);
        }
        let mut out = self.clone();
        let mut rng = stream_rng(seed, 1);
        out.extend_node_to_box(self.root, outer.clone(), &mut rng);
        Ok(out)
    }

    fn extend_node_to_box<R: Rng + ?Sized>(&mut self, id: NodeId, mut target: AxisAlignedBox, rng: &mut R) {
        loop {
            let node = &self.nodes[id.0];
            let inner = node.extent.clone();
            let gaps: Vec<f64> = (0..inner.dim())
                .map(|d| (target.side(d) - inner.side(d)).max(0.0))
                .collect();
            let rate: f64 = gaps.iter().sum();
            let time = node.start + ring_time(rate, rng);
            let limit = node.cut.as_ref().map_or(self.lifetime, |c| c.time);
            if !(time < limit && time <= self.lifetime) {
                self.nodes[id.0].extent = target.clone();
                if let Some(cut) = self.nodes[id.0].cut.clone() {
                    let (lo, hi) = target.split(cut.dimension, cut.location);
                    self.extend_node_to_box(cut.left, lo, rng);
                    self.extend_node_to_box(cut.right, hi, rng);
                }
                return;
            }
            let dimension = winning_clock(&gaps, rng);
            let location = uniform_outside(
                target.lower()[dimension],
                target.upper()[dimension],
                inner.lower()[dimension],
                inner.upper()[dimension],
                rng,
            );
            let (lo, hi) = target.split(dimension, location);
            let inner_is_left = inner.upper()[dimension] < location;
            let (kept, fresh) = if inner_is_left { (lo, hi) } else { (hi, lo) };
            let sibling = self.grow_box(fresh, time, None, rng);
            self.insert_above(id, target, time, dimension, location, sibling, inner_is_left);
            target = kept;
        }
    }

    /// Extend the sampled region of every cell on the path of `x` so that it
    /// contains `x`. Returns the leaf holding `x` afterwards. Cells created for
    /// `x` are grown restricted to `x` alone.
    pub fn extend_to_point<R: Rng + ?Sized>(&mut self, x: &[f64], rng: &mut R) -> Result<NodeId> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point coordinate".into()));
        }
        let mut id = self.root;
        loop {
            let node = &self.nodes[id.0];
            if !node.extent.contains_point(x) {
                let inner = node.extent.clone();
                let grown = inner.expanded_to(x);
                let gaps: Vec<f64> = (0..inner.dim())
                    .map(|d| (grown.side(d) - inner.side(d)).max(0.0))
                    .collect();
                let rate: f64 = gaps.iter().sum();
                let time = node.start + ring_time(rate, rng);
                let limit = node.cut.as_ref().map_or(self.lifetime, |c| c.time);
                if time < limit && time <= self.lifetime {
                    let dimension = winning_clock(&gaps, rng);
                    let location = uniform_outside(
                        grown.lower()[dimension],
                        grown.upper()[dimension],
                        inner.lower()[dimension],
                        inner.upper()[dimension],
                        rng,
                    );
                    let inner_is_left = x[dimension] > inner.upper()[dimension];
                    let leaf = self.push(Node {
                        extent: AxisAlignedBox::point(x),
                        start: time,
                        parent: None,
                        cut: None,
                    });
                    self.insert_above(id, grown, time, dimension, location, leaf, inner_is_left);
                    return Ok(leaf);
                }
                self.nodes[id.0].extent = grown;
            }
            match &self.nodes[id.0].cut {
                Some(cut) => id = self.child_towards(cut, x),
                None => return Ok(id),
            }
        }
    }

    /// Insert a new internal node above `id` with extent `outer` and a cut at
    /// `(time, dimension, location)`; `id` becomes one child and `sibling` the
    /// other.
    #[allow(clippy::too_many_arguments)]
    fn insert_above(
        &mut self,
        id: NodeId,
        outer: AxisAlignedBox,
        time: f64,
        dimension: usize,
        location: f64,
        sibling: NodeId,
        id_is_left: bool,
    ) -> NodeId {
        let (left, right) = if id_is_left { (id, sibling) } else { (sibling, id) };
        let parent = self.nodes[id.0].parent;
        let start = self.nodes[id.0].start;
        let new = self.push(Node {
            extent: outer,
            start,
            parent,
            cut: Some(Cut {
                time,
                dimension,
                location,
                left,
                right,
            }),
        });
        match parent {
            Some(p) => {
                let cut = self.nodes[p.0].cut.as_mut().expect("parent is internal");
                if cut.left == id {
                    cut.left = new;
                } else {
                    cut.right = new;
                }
            }
            None => self.root = new,
        }
        self.nodes[id.0].parent = Some(new);
        self.nodes[id.0].start = time;
        self.nodes[sibling.0].parent = Some(new);
        new
    }
}
