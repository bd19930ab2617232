//! Mel filterbanks and log-mel spectrograms.

use autograd::tensor::TensorBase;
use autograd::Scalar;

use crate::error::DspError;
use crate::stft::{analyze, WaveformBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MelScale {
    pub window: usize,
    pub hop: usize,
    pub n_mels: usize,
}

/// Scales for the multi-scale mel loss plus the log floor.
#[derive(Debug, Clone, PartialEq)]
pub struct MelScaleSet {
    pub scales: Vec<MelScale>,
    pub log_eps: f64,
}

impl Default for MelScaleSet {
    fn default() -> Self {
        let windows = [32usize, 64, 128, 256, 512, 1024, 2048];
        let mels = [5usize, 10, 20, 40, 80, 160, 320];
        Self {
            scales: windows
                .iter()
                .zip(mels)
                .map(|(&window, n_mels)| MelScale { window, hop: window / 4, n_mels })
                .collect(),
            log_eps: 1e-5,
        }
    }
}

impl MelScaleSet {
    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: String| Err(DspError::InvalidConfig(m));
        if self.scales.is_empty() {
            return bad("mel scale set is empty".into());
        }
        for pair in self.scales.windows(2) {
            if pair[1].window <= pair[0].window {
                return bad("mel windows must be strictly increasing".into());
            }
        }
        for s in &self.scales {
            if s.window % 2 != 0 || s.hop == 0 || s.window % s.hop != 0 {
                return bad(format!("bad mel scale {s:?}"));
            }
            if s.n_mels == 0 || s.n_mels >= s.window / 2 + 1 {
                return bad(format!("n_mels {} invalid for window {}", s.n_mels, s.window));
            }
        }
        Ok(())
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular mel filterbank, shape [n_mels, F] with F = n_fft/2 + 1.
/// A filter too narrow to cover any bin falls back to its single nearest bin
/// so every row has positive sum.
pub fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<f64> {
    let f_bins = n_fft / 2 + 1;
    let nyquist = sample_rate as f64 / 2.0;
    let m_hi = hz_to_mel(nyquist);
    let hz: Vec<f64> =
        (0..n_mels + 2).map(|j| mel_to_hz(m_hi * j as f64 / (n_mels + 1) as f64)).collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;

    let mut fb = vec![0.0f64; n_mels * f_bins];
    for m in 0..n_mels {
        let (lo, mid, hi) = (hz[m], hz[m + 1], hz[m + 2]);
        let mut any = false;
        for k in 0..f_bins {
            let f = bin_hz(k);
            let rising = (f - lo) / (mid - lo);
            let falling = (hi - f) / (hi - mid);
            let v = rising.min(falling).max(0.0);
            if v > 0.0 {
                fb[m * f_bins + k] = v;
                any = true;
            }
        }
        if !any {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for k in 0..f_bins {
                let d = (bin_hz(k) - mid).abs();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            fb[m * f_bins + best] = 1.0;
        }
    }
    fb
}

/// Log-mel spectrogram, shape [n_mels, frames]: power spectrum through the
/// filterbank, then log(energy + log_eps).
pub fn mel_spectrogram<S: Scalar>(
    x: &WaveformBase<S>,
    scale: MelScale,
    log_eps: f64,
) -> Result<TensorBase<S>, DspError> {
    let MelScale { window, hop, n_mels } = scale;
    if window % 2 != 0 || hop == 0 || window % hop != 0 {
        return Err(DspError::InvalidConfig(format!("bad mel scale {scale:?}")));
    }
    if n_mels == 0 || n_mels >= window / 2 + 1 {
        return Err(DspError::InvalidConfig(format!(
            "n_mels {n_mels} invalid for window {window}"
        )));
    }
    if x.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if x.len() < window {
        return Err(DspError::TooShort { len: x.len(), min: window });
    }
    let (re, im) = analyze(&x.samples, window, hop, window);
    let power = re.square().add(&im.square());
    let f_bins = window / 2 + 1;
    let fb: Vec<S> =
        mel_filterbank(x.sample_rate, window, n_mels).into_iter().map(S::lit).collect();
    let fb_t = TensorBase::constant(fb, &[n_mels, f_bins]).transpose(0, 1);
    let mel = power.matmul(&fb_t).transpose(0, 1);
    Ok(mel.add_scalar(S::lit(log_eps)).log())
}
