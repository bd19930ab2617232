//! Error type shared across the signal-processing APIs.

#[derive(Debug, thiserror::Error)]
pub enum DspError {
    #[error("empty waveform")]
    EmptyInput,
    #[error("waveform sample rate {got} does not match config rate {expected}")]
    SampleRate { expected: u32, got: u32 },
    #[error("waveform too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error("spectrum has no frames")]
    NoFrames,
    #[error("shape mismatch: {a:?} vs {b:?}")]
    ShapeMismatch { a: Vec<usize>, b: Vec<usize> },
    #[error("length mismatch: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("reference signal is all zero")]
    ZeroReference,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("wav: {0}")]
    Wav(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
