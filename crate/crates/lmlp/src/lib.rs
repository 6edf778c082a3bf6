//! IO, file formats, and the command-line surface of the tomography
//! toolkit. The numerics live in `lmlp-core`; this crate adds MRC volume
//! and stack persistence, `.lmlp` checkpoints, CSV tables, PNG
//! orthoslices, and the JSON run configuration.

pub mod checkpoint;
pub mod cli;
pub mod error;
pub mod mrc;
pub mod pngout;
pub mod runconfig;
pub mod tables;

pub use lmlp_core as core;
