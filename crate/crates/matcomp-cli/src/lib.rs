//! Command-line companion to `matcomp-core`: file formats, the
//! Monte-Carlo experiment runner, and the JSON report builders backing
//! the `matcomp` binary.

pub mod experiment;
pub mod io;
pub mod reports;
