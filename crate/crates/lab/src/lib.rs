//! File formats, run orchestration and the command-line front end for the
//! `olnl_core` training library.

pub mod ablate;
pub mod artifacts;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fsio;
pub mod oracle;
pub mod report;
pub mod runner;

pub use error::{LabError, Result};
pub use olnl_core;
