//! Error type for model construction, coding, and serialization.

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("stream count {s} outside 1..={max}")]
    StreamCount { s: usize, max: usize },
    #[error("time width {w} is odd; frame merging needs an even width")]
    OddWidth { w: usize },
    #[error("{what}: expected {expected}, got {got}")]
    DimMismatch { what: &'static str, expected: usize, got: usize },
    #[error("feature at scale {got}, expected scale {expected}")]
    ScaleMismatch { expected: usize, got: usize },
    #[error("code {code} out of range for codebook size {k}")]
    CodeOutOfRange { code: u32, k: usize },
    #[error("config fingerprint mismatch: payload {got:#018x}, model {expected:#018x}")]
    Fingerprint { expected: u64, got: u64 },
    #[error("payload unavailable: quantizers are bypassed")]
    Bypassed,
    #[error("model is not in the required mode: {0}")]
    WrongMode(&'static str),
    #[error("no codes recorded")]
    EmptyHistogram,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Dsp(#[from] dsp::DspError),
    #[error(transparent)]
    Bitstream(#[from] crate::bitstream::BitstreamError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
