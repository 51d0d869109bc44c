//! Versioned JSON form of a tree: the root box plus the nodes in pre-order,
//! each with its instantiated extent and, for internal nodes, the cut triple
//! `[time, dimension, location]`.

use serde::{Deserialize, Serialize};

use super::aabb::AxisAlignedBox;
use super::tree::{check_lifetime, Cut, MondrianTree, Node, NodeId};
use crate::error::{Error, Result};

pub const TREE_FORMAT: &str = "mondrian-tree";
pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct TreeRecord {
    format: String,
    version: u32,
    lifetime: f64,
    seed: u64,
    root_box: AxisAlignedBox,
    nodes: Vec<NodeRecord>,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    extent: AxisAlignedBox,
    cut: Option<(f64, usize, f64)>,
}

impl MondrianTree {
    pub fn to_json(&self) -> String {
        let nodes = self
            .subtree(self.root)
            .into_iter()
            .map(|id| {
                let n = &self.nodes[id.0];
                NodeRecord {
                    extent: n.extent.clone(),
                    cut: n.cut.as_ref().map(|c| (c.time, c.dimension, c.location)),
                }
            })
            .collect();
        let record = TreeRecord {
            format: TREE_FORMAT.to_string(),
            version: TREE_FORMAT_VERSION,
            lifetime: self.lifetime,
            seed: self.seed,
            root_box: self.root_box().clone(),
            nodes,
        };
        serde_json::to_string(&record).expect("tree records always serialize")
    }

    /// Parse and validate a tree written by [`MondrianTree::to_json`]. The
    /// arena of the result is in pre-order.
    pub fn from_json(text: &str) -> Result<Self> {
        let record: TreeRecord = serde_json::from_str(text)?;
        if record.format != TREE_FORMAT || record.version != TREE_FORMAT_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported tree format {} v{}",
                record.format, record.version
            )));
        }
        check_lifetime(record.lifetime)?;
        let mut tree = MondrianTree {
            nodes: Vec::with_capacity(record.nodes.len()),
            root: NodeId(0),
            lifetime: record.lifetime,
            seed: record.seed,
        };
        let mut iter = record.nodes.into_iter();
        let root = rebuild(&mut tree, &mut iter, None, 0.0)?;
        if iter.next().is_some() {
            return Err(Error::InvalidParameter("trailing nodes in tree record".into()));
        }
        if tree.nodes[root.0].extent != record.root_box {
            return Err(Error::InvalidParameter("root box does not match the first node".into()));
        }
        tree.root = root;
        Ok(tree)
    }
}

fn rebuild(
    tree: &mut MondrianTree,
    iter: &mut impl Iterator<Item = NodeRecord>,
    parent: Option<NodeId>,
    start: f64,
) -> Result<NodeId> {
    let record = iter
        .next()
        .ok_or_else(|| Error::InvalidParameter("truncated node list".into()))?;
    let id = tree.push(Node {
        extent: record.extent,
        start,
        parent,
        cut: None,
    });
    if let Some((time, dimension, location)) = record.cut {
        let extent = &tree.nodes[id.0].extent;
        if dimension >= extent.dim() {
            return Err(Error::InvalidParameter(format!("cut dimension {dimension} out of range")));
        }
        if !(time > start && time <= tree.lifetime) {
            return Err(Error::InvalidParameter(format!("cut time {time} out of order")));
        }
        if !(extent.lower()[dimension] < location && location < extent.upper()[dimension]) {
            return Err(Error::InvalidParameter(format!("cut location {location} outside cell")));
        }
        let (lo, hi) = extent.split(dimension, location);
        let left = rebuild(tree, iter, Some(id), time)?;
        let right = rebuild(tree, iter, Some(id), time)?;
        if !lo.contains_box(&tree.nodes[left.0].extent) || !hi.contains_box(&tree.nodes[right.0].extent) {
            return Err(Error::InvalidParameter("child extent escapes its side of the cut".into()));
        }
        tree.nodes[id.0].cut = Some(Cut {
            time,
            dimension,
            location,
            left,
            right,
        });
    }
    Ok(id)
}
