//! Command-line and HTTP front ends for the fabrication cost toolkit.

pub mod api;
pub mod cli;
pub mod rates;
pub mod server;

pub use api::{Api, ApiError, Endpoint, ScenarioRequest};
pub use cli::run_cli;
