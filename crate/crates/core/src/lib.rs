//! Social recommendation over a sliding window of social graphs.
pub mod check;
pub mod denoise;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod manifest;
pub mod objective;
pub mod propagation;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
