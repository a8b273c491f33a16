//! Support code for the `hope` command-line tool.

pub mod kat;

use std::fmt;
use std::process::ExitCode;

use hope_core::netproto::{ClientError, SnapshotError};

/// Process exit statuses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    Usage = 2,
    Key = 3,
    Crypto = 4,
    Protocol = 5,
}

impl From<Exit> for ExitCode {
    fn from(e: Exit) -> Self {
        ExitCode::from(e as u8)
    }
}

/// An error carrying the exit status it maps to.
#[derive(Debug)]
pub struct CliError {
    pub exit: Exit,
    pub message: String,
}

impl CliError {
    pub fn new(exit: Exit, message: impl Into<String>) -> Self {
        CliError {
            exit,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(Exit::Usage, message)
    }

    pub fn key(message: impl Into<String>) -> Self {
        Self::new(Exit::Key, message)
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hope_core::Error> for CliError {
    fn from(e: hope_core::Error) -> Self {
        use hope_core::Error as E;
        let exit = match e {
            E::PlaintextOutOfRange | E::InvalidParameter(_) => Exit::Usage,
            E::KeyMismatch | E::InvalidKey(_) | E::ConstraintViolation(_) | E::BoundTooLarge => Exit::Key,
            E::NotInvertible | E::MalformedCiphertext(_) | E::Exhausted(_) => Exit::Crypto,
        };
        CliError::new(exit, e.to_string())
    }
}

impl From<ClientError> for CliError {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Crypto(inner) => inner.into(),
            ClientError::OutOfBound(_) => CliError::usage(e.to_string()),
            ClientError::Transport(_) | ClientError::Server { .. } | ClientError::Protocol(_) => {
                CliError::new(Exit::Protocol, e.to_string())
            }
        }
    }
}

impl From<SnapshotError> for CliError {
    fn from(e: SnapshotError) -> Self {
        CliError::new(Exit::Protocol, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
