//! STFT analysis and synthesis as differentiable tensor programs.
//!
//! Both directions are built from gather/matmul/scatter primitives, so
//! gradients flow through synthesis into spectral losses. Frames are centered
//! by reflect-padding half a window on each side; the window sits
//! zero-centered inside the (possibly longer) transform frame. Synthesis
//! applies the window again and divides by the summed squared window, which
//! makes analysis-then-synthesis exact on the interior.

use std::rc::Rc;

use autograd::tensor::TensorBase;
use autograd::Scalar;

use crate::error::DspError;
use crate::window::hann_periodic;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StftConfig {
    pub sample_rate: u32,
    pub win_length: usize,
    pub hop_length: usize,
    pub n_fft: usize,
    pub window: Window,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self { sample_rate: 16000, win_length: 320, hop_length: 80, n_fft: 382, window: Window::Hann }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        let bad = |m: String| Err(DspError::InvalidConfig(m));
        if self.win_length == 0 || self.hop_length == 0 {
            return bad("window and hop must be positive".into());
        }
        if self.win_length % 2 != 0 {
            return bad(format!("window length {} must be even", self.win_length));
        }
        if self.win_length % self.hop_length != 0 {
            return bad(format!(
                "hop {} must divide window {}",
                self.hop_length, self.win_length
            ));
        }
        if self.n_fft < self.win_length {
            return bad(format!("n_fft {} shorter than window {}", self.n_fft, self.win_length));
        }
        Ok(())
    }

    /// Frequency bins F = n_fft/2 + 1.
    pub fn num_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Offset of the window inside the transform frame.
    pub fn frame_offset(&self) -> usize {
        (self.n_fft - self.win_length) / 2
    }

    /// Frames produced for an n-sample input.
    pub fn num_frames(&self, n: usize) -> usize {
        n / self.hop_length
    }
}

pub struct WaveformBase<S: Scalar> {
    pub samples: TensorBase<S>,
    pub sample_rate: u32,
}

impl<S: Scalar> Clone for WaveformBase<S> {
    fn clone(&self) -> Self {
        Self { samples: self.samples.clone(), sample_rate: self.sample_rate }
    }
}

impl<S: Scalar> WaveformBase<S> {
    pub fn new(samples: TensorBase<S>, sample_rate: u32) -> Self {
        assert_eq!(samples.shape().len(), 1, "waveform must be one-dimensional");
        Self { samples, sample_rate }
    }

    pub fn from_samples(samples: Vec<S>, sample_rate: u32) -> Self {
        let n = samples.len();
        Self { samples: TensorBase::constant(samples, &[n]), sample_rate }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub struct ComplexSpectrumBase<S: Scalar> {
    /// Shape [2, F, T]; channel 0 real, channel 1 imaginary.
    pub data: TensorBase<S>,
    pub config: StftConfig,
}

impl<S: Scalar> Clone for ComplexSpectrumBase<S> {
    fn clone(&self) -> Self {
        Self { data: self.data.clone(), config: self.config.clone() }
    }
}

impl<S: Scalar> ComplexSpectrumBase<S> {
    pub fn num_bins(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn num_frames(&self) -> usize {
        self.data.shape()[2]
    }
}

/// Reflect index (edge sample not repeated) into an n-sample signal padded by
/// `pad` on both sides.
fn reflect(p: usize, n: usize, pad: usize) -> usize {
    if p < pad {
        pad - p
    } else if p < pad + n {
        p - pad
    } else {
        2 * n + pad - 2 - p
    }
}

/// Gather map selecting all analysis frames at once: entry [t, i] reads
/// padded sample t*hop + i.
fn frame_indices(n: usize, win: usize, hop: usize, frames: usize) -> Vec<usize> {
    let pad = win / 2;
    let mut idx = Vec::with_capacity(frames * win);
    for t in 0..frames {
        for i in 0..win {
            idx.push(reflect(t * hop + i, n, pad));
        }
    }
    idx
}

/// Forward DFT matrices [win, F]: real part cos, imaginary part -sin, with
/// the window placed at `offset` inside the n_fft frame.
fn dft_mats<S: Scalar>(win: usize, n_fft: usize, offset: usize) -> (TensorBase<S>, TensorBase<S>) {
    let f = n_fft / 2 + 1;
    let mut re = Vec::with_capacity(win * f);
    let mut im = Vec::with_capacity(win * f);
    for i in 0..win {
        for k in 0..f {
            let ang = 2.0 * std::f64::consts::PI * (k * (i + offset)) as f64 / n_fft as f64;
            re.push(S::lit(ang.cos()));
            im.push(S::lit(-ang.sin()));
        }
    }
    (TensorBase::constant(re, &[win, f]), TensorBase::constant(im, &[win, f]))
}

/// Inverse DFT matrices [F, win] folding in the conjugate-symmetry weights
/// (1 for DC and Nyquist, 2 elsewhere) and the 1/n_fft factor.
fn idft_mats<S: Scalar>(win: usize, n_fft: usize, offset: usize) -> (TensorBase<S>, TensorBase<S>) {
    let f = n_fft / 2 + 1;
    let mut re = Vec::with_capacity(f * win);
    let mut im = Vec::with_capacity(f * win);
    for k in 0..f {
        let w = if k == 0 || 2 * k == n_fft { 1.0 } else { 2.0 };
        for i in 0..win {
            let ang = 2.0 * std::f64::consts::PI * (k * (i + offset)) as f64 / n_fft as f64;
            re.push(S::lit(w * ang.cos() / n_fft as f64));
            im.push(S::lit(-w * ang.sin() / n_fft as f64));
        }
    }
    (TensorBase::constant(re, &[f, win]), TensorBase::constant(im, &[f, win]))
}

/// Core analysis shared by the codec STFT and the mel front end: frame,
/// window, transform. Returns ([T, F] real, [T, F] imaginary).
pub(crate) fn analyze<S: Scalar>(
    x: &TensorBase<S>,
    win: usize,
    hop: usize,
    n_fft: usize,
) -> (TensorBase<S>, TensorBase<S>) {
    let n = x.len();
    let frames = n / hop;
    let offset = (n_fft - win) / 2;
    let idx = Rc::new(frame_indices(n, win, hop, frames));
    let framed = x.gather(idx, &[frames, win]);
    let w = TensorBase::constant(hann_periodic::<S>(win), &[win]);
    let xw = framed.mul(&w);
    let (dr, di) = dft_mats::<S>(win, n_fft, offset);
    (xw.matmul(&dr), xw.matmul(&di))
}

pub fn stft<S: Scalar>(
    x: &WaveformBase<S>,
    config: &StftConfig,
) -> Result<ComplexSpectrumBase<S>, DspError> {
    config.validate()?;
    if x.is_empty() {
        return Err(DspError::EmptyInput);
    }
    if x.sample_rate != config.sample_rate {
        return Err(DspError::SampleRate { expected: config.sample_rate, got: x.sample_rate });
    }
    if x.len() < config.win_length {
        return Err(DspError::TooShort { len: x.len(), min: config.win_length });
    }
    let frames = config.num_frames(x.len());
    let f = config.num_bins();
    let (re, im) = analyze(&x.samples, config.win_length, config.hop_length, config.n_fft);
    let re = re.transpose(0, 1).reshape(&[1, f, frames]);
    let im = im.transpose(0, 1).reshape(&[1, f, frames]);
    let data = TensorBase::concat(0, &[&re, &im]);
    Ok(ComplexSpectrumBase { data, config: config.clone() })
}

pub fn istft<S: Scalar>(spec: &ComplexSpectrumBase<S>) -> Result<WaveformBase<S>, DspError> {
    let cfg = &spec.config;
    cfg.validate()?;
    let shape = spec.data.shape().to_vec();
    if shape.len() != 3 || shape[0] != 2 || shape[1] != cfg.num_bins() {
        let frames = if shape.len() == 3 { shape[2] } else { 0 };
        return Err(DspError::ShapeMismatch { a: shape, b: vec![2, cfg.num_bins(), frames] });
    }
    let (f, frames) = (shape[1], shape[2]);
    if frames == 0 {
        return Err(DspError::NoFrames);
    }
    let (win, hop) = (cfg.win_length, cfg.hop_length);
    let pad = win / 2;
    if hop > pad {
        return Err(DspError::InvalidConfig(format!(
            "hop {hop} must be at most half the window {win} for synthesis"
        )));
    }

    let re = spec.data.slice(0, 0, 1).reshape(&[f, frames]).transpose(0, 1);
    let im = spec.data.slice(0, 1, 2).reshape(&[f, frames]).transpose(0, 1);
    let (ir, ii) = idft_mats::<S>(win, cfg.n_fft, cfg.frame_offset());
    let time = re.matmul(&ir).add(&im.matmul(&ii));

    let w64 = hann_periodic::<f64>(win);
    let w = TensorBase::constant(hann_periodic::<S>(win), &[win]);
    let weighted = time.mul(&w).reshape(&[frames * win]);

    let out_len = (frames - 1) * hop + win;
    let mut idx = Vec::with_capacity(frames * win);
    for t in 0..frames {
        for i in 0..win {
            idx.push(t * hop + i);
        }
    }
    let ola = weighted.scatter_add(Rc::new(idx), &[out_len]);

    let mut wsum = vec![0.0f64; out_len];
    for t in 0..frames {
        for (i, &wv) in w64.iter().enumerate() {
            wsum[t * hop + i] += wv * wv;
        }
    }
    let inv: Vec<S> = wsum.iter().map(|&v| S::lit(1.0 / v.max(1e-12))).collect();
    let normalized = ola.mul(&TensorBase::constant(inv, &[out_len]));

    let samples = normalized.slice(0, pad, pad + frames * hop);
    Ok(WaveformBase { samples, sample_rate: cfg.sample_rate })
}
