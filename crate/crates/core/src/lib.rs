//! Anisotropic Gaussian filtering with recursive filters, fiber orientation
//! estimation and the synthetic benchmarks built on top of them.

pub mod anisofilter;
pub mod cli;
pub mod decomp;
pub mod error;
pub mod gauss1d;
pub mod image;
pub mod interp;
pub mod io;
pub mod orientation;
pub mod segment;
pub mod synthbench;

pub use error::{Error, Result};
