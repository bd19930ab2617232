//! Command implementations behind the `cscodec` binary.

pub mod cfgfile;
pub mod cmds;
pub mod error;

pub use error::CliError;
