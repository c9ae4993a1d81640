//! Scenario-driven front end for `dysonchain`: TOML scenarios, the run
//! pipeline, JSON/CSV reports and the acceptance suite.

pub mod error;
pub mod report;
pub mod run;
pub mod scenario;
pub mod verify;

pub use error::CliError;
pub use report::{Check, RunReport};
pub use run::{run, RunOptions};
pub use scenario::{load_scenario, save_scenario, shipped, Scenario, SHIPPED};
pub use verify::{verify_all, Verification, VerifyOptions};
