//! Mondrian random features: a sparse random feature map whose inner products
//! approximate the Laplace kernel `exp(-λ‖x − x′‖₁)`.
//!
//! Because cuts of a Mondrian process only appear over time, one sample up to
//! a terminal lifetime `Λ` contains the feature spaces for every `λ ∈ [0, Λ]`.
//! [`sweep`] replays those cuts in time order while keeping a ridge solver (or
//! an SGD model) up to date, which yields validation errors and marginal
//! likelihoods for all kernel widths at roughly the cost of one fit.

pub mod baselines;
pub mod cholesky;
pub mod data;
pub mod error;
pub mod features;
pub mod forest;
pub mod kernels;
pub mod mondrian;
pub mod ridge;
pub mod rng;
pub mod sgd;
pub mod sweep;

pub use error::{Error, Result};
pub use features::{ColumnId, FeatureIndexer, SparseFeatureVector, SparseMatrix};
pub use mondrian::{AxisAlignedBox, CutEvent, Forest, MondrianTree, NodeId};
pub use ridge::RidgeState;
