//! Command-line pipeline: ingest a corpus, split the temporal graph, build
//! node features, then train and evaluate link predictors.
//!
//! Each command writes its artifacts plus a `manifest.json` recording the
//! config hash and checksums; an unchanged rerun reuses what is on disk.

pub mod cli;
pub mod commands;
pub mod config;
pub mod manifest;

use std::ffi::OsString;
use std::sync::Arc;

use clap::Parser;
use qclp_core::llm::{Transport, UreqTransport};

pub use cli::{Cli, Command};

/// A problem with the invocation rather than with running it. Exit code 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<UsageError>().is_some() {
        return EXIT_USAGE;
    }
    match err.downcast_ref::<qclp_core::Error>() {
        Some(qclp_core::Error::InvalidConfig(_) | qclp_core::Error::FutureYear { .. }) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

/// Parse `args` (program name first), run, and return the exit code.
/// `transport` serves any live LLM calls.
pub fn run_with(args: Vec<OsString>, transport: Arc<dyn Transport>) -> i32 {
    let args = match config::expand_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match commands::run(&cli, transport) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}

pub fn run_env() -> i32 {
    run_with(std::env::args_os().collect(), Arc::new(UreqTransport::new()))
}
