//! File formats, experiment drivers and the `optval` command line on top
//! of `optval-core`.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod formats;
pub mod io;
pub mod report;
