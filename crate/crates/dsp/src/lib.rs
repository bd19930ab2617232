//! Signal-processing front end: STFT analysis/synthesis, mel filterbanks,
//! reconstruction losses, objective metrics, and WAV I/O.
//!
//! Analysis and synthesis are differentiable tensor programs so spectral and
//! mel losses can drive the model from either domain. Generic over the scalar
//! type; f64 aliases at the root.

pub mod error;
pub mod loss;
pub mod mel;
pub mod metrics;
pub mod stft;
pub mod wav;
pub mod window;

pub use error::DspError;
pub use loss::{loss_mel, loss_mel_to_targets, loss_stft, mel_distance, mel_targets};
pub use mel::{mel_filterbank, mel_spectrogram, MelScale, MelScaleSet};
pub use metrics::si_sdr;
pub use stft::{istft, stft, ComplexSpectrumBase, StftConfig, WaveformBase, Window};
pub use wav::{read_wav, write_wav};
pub use window::hann_periodic;

/// Workspace-standard waveform (f64).
pub type Waveform = WaveformBase<f64>;
/// Workspace-standard complex spectrum (f64).
pub type ComplexSpectrum = ComplexSpectrumBase<f64>;
