//! Personalized subgraph federated learning with learned neighbor sampling.

pub mod error;
pub mod fedsim;
pub mod gflownet;
pub mod gnn;
pub mod graph;
pub mod numerics;
pub mod partition;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{ClientDataset, Graph, SplitMask, SplitRatios};
