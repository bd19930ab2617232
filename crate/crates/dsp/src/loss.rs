//! Reconstruction losses: complex-spectrum MSE and multi-scale log-mel MAE.

use autograd::tensor::TensorBase;
use autograd::Scalar;

use crate::error::DspError;
use crate::mel::{mel_spectrogram, MelScaleSet};
use crate::stft::{ComplexSpectrumBase, WaveformBase};

/// Mean squared error over all 2 F T entries of two complex spectra.
pub fn loss_stft<S: Scalar>(
    x: &ComplexSpectrumBase<S>,
    x_hat: &ComplexSpectrumBase<S>,
) -> Result<TensorBase<S>, DspError> {
    if x.data.shape() != x_hat.data.shape() {
        return Err(DspError::ShapeMismatch {
            a: x.data.shape().to_vec(),
            b: x_hat.data.shape().to_vec(),
        });
    }
    Ok(x.data.sub(&x_hat.data).square().mean())
}

/// Log-mel spectrograms of `x` at every scale, detached for reuse as fixed
/// targets across training steps.
pub fn mel_targets<S: Scalar>(
    x: &WaveformBase<S>,
    scales: &MelScaleSet,
) -> Result<Vec<TensorBase<S>>, DspError> {
    scales.validate()?;
    scales
        .scales
        .iter()
        .map(|&s| mel_spectrogram(x, s, scales.log_eps).map(|m| m.detach()))
        .collect()
}

/// Mean absolute log-mel difference against precomputed targets, averaged
/// over scales.
pub fn loss_mel_to_targets<S: Scalar>(
    targets: &[TensorBase<S>],
    x_hat: &WaveformBase<S>,
    scales: &MelScaleSet,
) -> Result<TensorBase<S>, DspError> {
    scales.validate()?;
    if targets.len() != scales.scales.len() {
        return Err(DspError::LengthMismatch { a: targets.len(), b: scales.scales.len() });
    }
    let mut acc: Option<TensorBase<S>> = None;
    for (target, &scale) in targets.iter().zip(&scales.scales) {
        let m = mel_spectrogram(x_hat, scale, scales.log_eps)?;
        if m.shape() != target.shape() {
            return Err(DspError::ShapeMismatch {
                a: target.shape().to_vec(),
                b: m.shape().to_vec(),
            });
        }
        let mae = m.sub(target).abs().mean();
        acc = Some(match acc {
            Some(a) => a.add(&mae),
            None => mae,
        });
    }
    Ok(acc.expect("non-empty scale set").scale(S::lit(1.0 / scales.scales.len() as f64)))
}

/// Multi-scale mel loss: mean over scales of the MAE between log-mels.
pub fn loss_mel<S: Scalar>(
    x: &WaveformBase<S>,
    x_hat: &WaveformBase<S>,
    scales: &MelScaleSet,
) -> Result<TensorBase<S>, DspError> {
    if x.len() != x_hat.len() {
        return Err(DspError::LengthMismatch { a: x.len(), b: x_hat.len() });
    }
    if x.sample_rate != x_hat.sample_rate {
        return Err(DspError::SampleRate { expected: x.sample_rate, got: x_hat.sample_rate });
    }
    let targets = mel_targets(x, scales)?;
    loss_mel_to_targets(&targets, x_hat, scales)
}

/// Objective mel metric: same definition as the mel loss, reported in plain
/// f64.
pub fn mel_distance<S: Scalar>(
    x: &WaveformBase<S>,
    x_hat: &WaveformBase<S>,
    scales: &MelScaleSet,
) -> Result<f64, DspError> {
    Ok(loss_mel(x, x_hat, scales)?.item().as_f64())
}
