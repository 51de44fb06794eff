//! Small dense networks, Adam, and the two-phase topological training loop.

pub mod adam;
pub mod data;
pub mod mlp;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{Activation, Dense, ForwardCache, Gradients, Mlp};
pub use train::{
    topo_phase, train, train_model, Domain, EpsilonPolicy, PhaseRecord, SimplifyDirections, Task, TestMetrics,
    TrainConfig, TrainReport,
};
