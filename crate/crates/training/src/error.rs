//! Training failure modes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite {term} ({value}) at step {step}; aborting before the update")]
    NonFinite { step: usize, term: &'static str, value: f64 },
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Codec(#[from] codec::CodecError),
    #[error(transparent)]
    Tape(#[from] autograd::TapeError),
    #[error(transparent)]
    Dsp(#[from] dsp::DspError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
