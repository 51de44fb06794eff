//! Topological regularization through persistence-sensitive simplification.
//!
//! * [`field`]: point clouds, k-NN and grid graphs, scalar fields.
//! * [`merge_tree`]: merge trees and 0-dimensional persistence diagrams.
//! * [`simplify`]: ε-simplification, ε heuristics, classifier confidence.
//! * [`losses`]: PSO and diagram losses with gradients.
//! * [`optim_values`]: gradient descent directly on vertex values.
//! * [`neural`]: dense networks trained with topological phases.

pub mod error;
pub mod field;
pub mod losses;
pub mod merge_tree;
pub mod neural;
pub mod optim_values;
pub mod simplify;
pub mod union_find;

pub use error::{Error, Result};
pub use field::{Graph, PointCloud, ScalarField};
pub use merge_tree::{compute_merge_tree, diagram_of, Direction, MergeTree, PersistenceDiagram, Vineyard};
pub use simplify::{simplify, SimplificationTarget};
