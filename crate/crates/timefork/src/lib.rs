//! Std companion to `timefork-core`: configuration files, parallel
//! experiment runs, header ingestion, report formats and the CLI.

pub mod cli;
pub mod config;
pub mod io;
pub mod report;
pub mod runner;

pub use timefork_core as core;
