//! The `thunder` command-line tool: serves the emulated cloud over HTTP and
//! plays levels against it with cloud-CLI-style verbs.
//!
//! Exit codes: 0 success, 1 API error (or a wrong flag), 2 the API could
//! not be reached, 3 usage or local file errors.

pub mod cli;
mod commands;
pub mod config;
pub mod error;
mod render;
pub mod server;
pub mod transport;

pub use commands::{run, write_hint_site, Env};
pub use error::{CliError, ExitCode};
pub use transport::{Connector, Transport};
