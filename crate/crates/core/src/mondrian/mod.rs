//! Mondrian process samples on axis-aligned boxes: sampling via competing
//! exponential clocks, conditional extension to larger regions, cell lookup at
//! any lifetime, and the merged stream of cut events of a forest.

mod aabb;
mod clock;
mod extend;
mod forest;
mod serialize;
mod tree;

pub use aabb::AxisAlignedBox;
pub use forest::{cut_events, CutEvent, Forest};
pub use serialize::{TREE_FORMAT, TREE_FORMAT_VERSION};
pub use tree::{Cut, MondrianTree, Node, NodeId};
