//! Federated SGD simulator: round engine, in-process and TCP transports,
//! protocol worker, CSV files and the experiment CLI.
//!
//! The numerical pieces live in [`fedsim_core`]; this crate adds everything
//! that needs threads, sockets, processes or files.

pub mod cli;
pub mod csvio;
pub mod runtime;
pub mod wire;
pub mod worker;

pub use fedsim_core as core;
