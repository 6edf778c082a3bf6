//! Numerical core of the `lmlp` tomography toolkit.
//!
//! Reconstructs volumes from tilt series one voxel at a time: projections
//! are ramp-filtered, a small patch is lifted from every tilt around the
//! voxel's detector footprint, and a trained MLP maps the concatenated
//! patches to a density value. Classical filtered back-projection and FSC
//! evaluation live here too, as baseline and metric.
//!
//! The crate is `no_std`-compatible (with `alloc`); the `parallel` feature
//! adds rayon-backed inner loops that stay bit-identical to the serial
//! path.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub mod fbp;
pub mod fft;
pub mod filtering;
pub mod grid;
pub mod math;
pub mod metrics;
pub mod mlp;
pub mod par;
pub mod patch;
pub mod phantom;
pub mod pipeline;
pub mod projector;
pub mod resample;
pub mod rng;

pub use error::{Result, TomoError};
pub use grid::{sample_volume_trilinear, world_to_detector};
pub use grid::{GridSpec, SeriesKind, TiltGeometry, TiltSeries, Volume};
