//! Heterogeneous radar/lidar place recognition.
//!
//! Radar scans and lidar submaps are turned into polar descriptors, embedded by
//! one shared encoder-decoder and reduced to rotation-invariant spectral
//! signatures, so radar-to-lidar, radar-to-radar and lidar-to-lidar retrieval
//! all happen in one signature space.

pub mod cli;
pub mod dataset;
pub mod descriptor;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod net;
pub mod retrieval;
pub mod rng;
pub mod sim;
pub mod spectral;
pub mod submap;
pub mod train;
pub mod trajectory;

pub use error::{Error, FormatError, Result};
pub use grid::Grid;
