//! Message embedding, robust block hashing and compression simulation for
//! studying whether hash changes separate message edits from compression.

pub mod compression;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod imagecore;
pub mod perceptual;
pub mod transforms;

pub use error::{Error, Result};
