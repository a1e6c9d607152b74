//! Deep metric learning on tabular features: four embedding losses with
//! analytic gradients, batch builders and triplet mining, a small MLP
//! embedder trained with Adam, and clustering/classification evaluation.

pub mod batching;
pub mod data;
pub mod error;
pub mod eval;
pub mod harness;
pub mod losses;
pub mod model;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use numerics::Matrix;
