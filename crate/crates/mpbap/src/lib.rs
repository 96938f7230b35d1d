//! Instance files, reports and the command line for `mpbap-core`.

pub mod cli;
pub mod io;
