//! Command-line front end for the `face` binary: matrix files, the `fit`,
//! `simulate` and `bench` subcommands, and their report formats.

pub mod bench;
pub mod fit;
pub mod matrix_io;
pub mod plot;
pub mod simulate;
