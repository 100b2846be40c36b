use thiserror::Error;

use crate::envelope::MsgType;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error(transparent)]
    Core(#[from] fedsurv_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("short frame")]
    ShortFrame,
    #[error("frame of {len} bytes exceeds the {max}-byte limit")]
    FrameTooLarge { len: u64, max: usize },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("unsupported protocol version {0}")]
    Version(u64),
    #[error("out-of-phase message: got {got}, expected {expected}")]
    OutOfPhase { got: MsgType, expected: MsgType },
    #[error("unknown client `{0}`")]
    UnknownClient(String),
    #[error("duplicate client `{0}`")]
    DuplicateClient(String),
    #[error("timed out waiting for {0}")]
    Timeout(String),
    #[error("round aborted: {0}")]
    RoundAborted(String),
    #[error("privacy violation: {0}")]
    Privacy(String),
    #[error("could not connect to {addr} after {attempts} attempts: {source}")]
    Connect {
        addr: String,
        attempts: u32,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl TransportError {
    /// Connection-level failures a client may retry.
    pub fn is_retriable_io(e: &std::io::Error) -> bool {
        use std::io::ErrorKind::*;
        matches!(
            e.kind(),
            ConnectionRefused | ConnectionReset | ConnectionAborted | NotConnected | TimedOut | AddrNotAvailable
        )
    }
}

pub type Result<T, E = TransportError> = std::result::Result<T, E>;
