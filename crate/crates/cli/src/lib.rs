//! Command-line front end for the alphabet-state error-correction toolkit:
//! scenario configs in, JSON reports and CSV sweep tables out.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;
pub mod scenarios;
pub mod sweep;

pub use config::ScenarioConfig;
pub use error::{CliError, CliResult};
