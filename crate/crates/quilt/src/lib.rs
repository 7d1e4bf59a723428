//! File formats, the `quilt` command-line tool, and a parallel runner for
//! the simulation studies of [`quilt_core`].

pub mod cli;
pub mod error;
pub mod io;
pub mod manifest;
pub mod runner;
pub mod tables;

pub use quilt_core;
