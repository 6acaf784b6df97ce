//! Library side of the `oscdamp` command-line tool: config parsing and the
//! subcommands, usable from tests without spawning a process.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;

use oscdamp::Error;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NumericalDivergence { .. }
        | Error::TrainingDivergence(_)
        | Error::NonDiagonalizable(_)
        | Error::EigenNoConvergence
        | Error::Aliasing(_) => 2,
        Error::Io(_) | Error::Checkpoint(_) => 3,
        _ => 1,
    }
}
