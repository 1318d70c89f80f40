//! Command-line toolkit around `mloglin-core`: counts CSV and model-spec
//! JSON ingestion, fitting and mediation reports, multinomial simulation,
//! and a deterministic identity-verification suite.

pub mod error;
pub mod formats;
pub mod report;
pub mod run;
pub mod verify;

pub use error::CliError;
pub use run::{run, RunConfig};
