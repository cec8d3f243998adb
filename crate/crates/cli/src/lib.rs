//! Library side of the `sphinv` command-line tool: configuration, the
//! training/inversion/evaluation stages and table rendering. The binary in
//! `main.rs` is a thin argument parser over these functions.

pub mod artifacts;
pub mod config;
pub mod report;
pub mod run;

use std::fmt;

/// Marks an error caused by the invocation (bad flags, config or mode) rather
/// than by the data. Mapped to exit code 2; everything else exits with 3.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.downcast_ref::<UsageError>().is_some()) {
        EXIT_USAGE
    } else {
        EXIT_DATA
    }
}
