//! Command-line front end: configuration files, run manifests and the
//! subcommand implementations behind the `ipdg-qmc` binary.

pub mod commands;
pub mod config;
pub mod manifest;

use ipdg_qmc::Error;

/// Process exit status for an error: 1 invalid input, 2 numerical failure, 3 I/O.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Validation(_) | Error::ModelViolation(_) | Error::NonManifold(_) | Error::Parse(_) => 1,
        Error::Numerical(_) => 2,
        Error::Io(_) => 3,
    }
}
