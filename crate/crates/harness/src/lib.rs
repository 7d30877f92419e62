//! Configuration, seeded initial data, persistence and the scenario
//! runners behind the `korteweg` command.

pub mod config;
pub mod error;
pub mod initial;
pub mod report;
pub mod scenarios;
pub mod snapshot;
pub mod verify;

pub use config::{ScenarioConfig, ScenarioKind};
pub use error::{HarnessError, Result};
pub use report::{ScenarioReport, Table, Verdict};
