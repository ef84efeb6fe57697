//! Host side of the RPU toolchain: file formats, config lookup and the
//! `rpu` command line. The machine model itself lives in `rpu-core`.

pub mod cli;
pub mod config;
pub mod formats;
mod report;
