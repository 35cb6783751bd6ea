//! The separable compactly supported wavelet dictionary.

pub mod atlas;
pub mod filter;

pub use atlas::{default_step, AtomIndex, DictionaryAtlas, Factor};
pub use filter::WaveletFilter;
