//! Configuration parsing and subcommand implementations behind the `hsc`
//! binary.

pub mod commands;
pub mod config;
