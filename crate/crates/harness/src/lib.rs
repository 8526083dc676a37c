//! Experiment harness: data collection, training, scenario runs, reports
//! and the `footstep` command line.

pub mod cli;
pub mod collect;
pub mod config;
pub mod experiment;
pub mod report;
pub mod scenarios;
