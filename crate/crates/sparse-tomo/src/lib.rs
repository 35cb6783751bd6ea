//! Sparse-angle tomography with wavelet dictionaries and weighted ℓ¹ minimization.

pub mod certification;
pub mod error;
pub mod experiment;
pub mod forward;
pub mod image;
pub mod solver;
pub mod sparsity;
pub mod stats;
pub mod wavelet;

pub use error::{Error, Result};
