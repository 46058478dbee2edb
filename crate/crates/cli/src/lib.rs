//! File formats, parallel cross-validation and the `acoso` command line
//! on top of [`acoso_core`].

pub mod cli;
pub mod io;
pub mod parallel;

pub use acoso_core as core;
