//! Experiment orchestration: configuration, subcommands and the self-test.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod selftest;

pub use commands::{run, Command, Outcome};
pub use config::ExperimentConfig;
