//! File formats, batch tools and the trainer sidecar around `cudaug-core`.

pub mod augment;
pub mod codec;
pub mod config;
pub mod error;
pub mod formats;
pub mod protocol;
pub mod server;
pub mod simulate;

pub use error::{Error, Result};
