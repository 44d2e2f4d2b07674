//! Scenario files, reports, completion-time sampling and the subcommands.

pub mod commands;
pub mod report;
pub mod scenario;
pub mod ttc;
