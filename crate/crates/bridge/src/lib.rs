//! Std side of the teleoperation engine: URDF and config files, CSV streams,
//! the threaded runtime, the live WebSocket service and the `uttg` CLI.

pub mod cli;
pub mod config;
pub mod csvio;
pub mod error;
pub mod protocol;
pub mod report;
pub mod runtime;
pub mod server;
pub mod urdf;

pub use error::{BridgeError, Result};
