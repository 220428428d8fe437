//! Command implementations behind the `barostab` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
