//! Library half of the `mesure` binary: configuration, document schemas,
//! and the subcommand implementations, exposed so integration tests can
//! drive them without spawning processes.

pub mod commands;
pub mod config;
pub mod results;

pub use commands::{CliError, ConfigOverrides, ReportFormat};
pub use config::{CampaignConfig, DeviceEndpoint, LoadedConfig};
pub use results::{ResultsDocument, ScoreCardDocument, WeightsDocument, SCHEMA_VERSION};
