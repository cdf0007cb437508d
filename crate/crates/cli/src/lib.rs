//! Command-line front end: configuration, data files and the commands
//! behind the `paralens` binary.

pub mod commands;
pub mod config;
pub mod io;
pub mod sexpr;
