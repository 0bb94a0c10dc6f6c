//! Scenario files, output formats and command implementations behind the
//! `cmc` binary.

pub mod commands;
pub mod output;
pub mod scenario;

pub use commands::{run, CliError, Command, RunOptions};
pub use scenario::{Scenario, ScenarioError};
