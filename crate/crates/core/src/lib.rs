//! Volterra-driven interacting diffusions: fBm kernels, Girsanov weights and
//! Markov random field structure on graphs.

pub mod acceptance;
pub mod cli;
pub mod discrete;
pub mod drift;
pub mod error;
pub mod girsanov;
pub mod graph;
pub mod kernels;
pub mod linalg;
pub mod mrf;
pub mod paths;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
