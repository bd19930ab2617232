//! Error-to-exit-code mapping: 2 for usage/input problems, 3 for bad or
//! mismatched data.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config keys, missing inputs: exit 2.
    Usage(String),
    /// Corrupt payloads, fingerprint mismatches: exit 3.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("io error: {e}"))
    }
}

impl From<codec::CodecError> for CliError {
    fn from(e: codec::CodecError) -> Self {
        match &e {
            codec::CodecError::Fingerprint { .. } | codec::CodecError::Checkpoint(_) => {
                CliError::Data(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<dsp::DspError> for CliError {
    fn from(e: dsp::DspError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<training::TrainError> for CliError {
    fn from(e: training::TrainError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<codec::bitstream::BitstreamError> for CliError {
    fn from(e: codec::bitstream::BitstreamError) -> Self {
        CliError::Data(e.to_string())
    }
}
