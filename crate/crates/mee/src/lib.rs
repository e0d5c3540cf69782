//! File formats, live service clients and the `mee` command line around
//! [`mee_core`].

pub mod backend;
pub mod cli;
pub mod config;
pub mod error;
pub mod files;
pub mod http;
pub mod manifest;
pub mod overlay;
pub mod script;

pub use error::CliError;
