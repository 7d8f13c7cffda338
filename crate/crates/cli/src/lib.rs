//! Command-line front end: problem files, command dispatch and reports.

pub mod commands;
pub mod problem;
pub mod report;

pub use commands::{execute, render, run, Cli, Command, Format, Output};
