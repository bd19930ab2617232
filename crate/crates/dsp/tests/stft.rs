//! Analysis/synthesis oracles: framing arithmetic, bin concentration,
//! round-trip accuracy, linearity, and error paths.

use autograd::{rng, Tensor};
use dsp::{hann_periodic, istft, stft, ComplexSpectrum, DspError, StftConfig, Waveform};

fn noise(n: usize, seed: u64, amp: f64) -> Vec<f64> {
    let mut r = rng::seeded(seed);
    rng::uniform_vec(&mut r, n, -amp, amp)
}

#[test]
fn hann_periodic_values() {
    let w = hann_periodic::<f64>(4);
    let want = [0.0, 0.5, 1.0, 0.5];
    for (g, w) in w.iter().zip(want) {
        assert!((g - w).abs() < 1e-15, "{g} vs {w}");
    }
    let w = hann_periodic::<f64>(320);
    assert_eq!(w[0], 0.0);
    assert!((w[160] - 1.0).abs() < 1e-15);
}

#[test]
fn three_seconds_gives_600_frames() {
    let cfg = StftConfig::default();
    let x = Waveform::from_samples(noise(48000, 1, 0.5), 16000);
    let spec = stft(&x, &cfg).unwrap();
    assert_eq!(spec.data.shape(), &[2, 192, 600]);
    assert_eq!(cfg.num_bins(), 192);
    assert_eq!(cfg.frame_offset(), 31);
}

#[test]
fn frame_count_floors() {
    let cfg = StftConfig::default();
    let x = Waveform::from_samples(noise(48079, 2, 0.5), 16000);
    let spec = stft(&x, &cfg).unwrap();
    assert_eq!(spec.num_frames(), 600);
}

#[test]
fn zero_waveform_gives_zero_spectrum() {
    let cfg = StftConfig::default();
    let x = Waveform::from_samples(vec![0.0; 8000], 16000);
    let spec = stft(&x, &cfg).unwrap();
    assert!(spec.data.data().iter().all(|&v| v == 0.0));
}

#[test]
fn bin_centered_sinusoid_concentrates_energy() {
    let cfg = StftConfig::default();
    let k = 24usize;
    let f_hz = k as f64 * 16000.0 / 382.0;
    let x: Vec<f64> = (0..16000)
        .map(|i| (2.0 * std::f64::consts::PI * f_hz * i as f64 / 16000.0).sin() * 0.8)
        .collect();
    let spec = stft(&Waveform::from_samples(x, 16000), &cfg).unwrap();
    let (bins, frames) = (spec.num_bins(), spec.num_frames());
    let d = spec.data.data();
    for t in 3..frames - 3 {
        let mut best = 0usize;
        let mut best_mag = -1.0;
        for b in 0..bins {
            let re = d[b * frames + t];
            let im = d[bins * frames + b * frames + t];
            let mag = re * re + im * im;
            if mag > best_mag {
                best_mag = mag;
                best = b;
            }
        }
        assert_eq!(best, k, "frame {t} peaks at bin {best}");
    }
}

#[test]
fn round_trip_reconstructs_interior() {
    let cfg = StftConfig::default();
    let x = noise(16000, 3, 0.7);
    let spec = stft(&Waveform::from_samples(x.clone(), 16000), &cfg).unwrap();
    let y = istft(&spec).unwrap();
    assert_eq!(y.len(), 16000);
    let (a, b) = (cfg.win_length, x.len() - cfg.win_length);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in a..b {
        let d = y.samples.data()[i] - x[i];
        num += d * d;
        den += x[i] * x[i];
    }
    let rel = (num / den).sqrt();
    assert!(rel < 1e-4, "interior relative error {rel}");
}

#[test]
fn stft_is_linear() {
    let cfg = StftConfig::default();
    let x = noise(4000, 4, 0.5);
    let y = noise(4000, 5, 0.5);
    let (a, b) = (0.7, -1.3);
    let combined: Vec<f64> = x.iter().zip(&y).map(|(xv, yv)| a * xv + b * yv).collect();
    let sx = stft(&Waveform::from_samples(x, 16000), &cfg).unwrap();
    let sy = stft(&Waveform::from_samples(y, 16000), &cfg).unwrap();
    let sc = stft(&Waveform::from_samples(combined, 16000), &cfg).unwrap();
    let want = sx.data.scale(a).add(&sy.data.scale(b));
    for (g, w) in sc.data.data().iter().zip(want.data()) {
        assert!((g - w).abs() < 1e-6, "{g} vs {w}");
    }
}

#[test]
fn istft_zero_spectrum_is_silence() {
    let cfg = StftConfig::default();
    let spec = ComplexSpectrum { data: Tensor::zeros(&[2, 192, 40]), config: cfg };
    let y = istft(&spec).unwrap();
    assert_eq!(y.len(), 40 * 80);
    assert!(y.samples.data().iter().all(|&v| v == 0.0));
}

#[test]
fn istft_commutes_with_scaling() {
    let cfg = StftConfig::default();
    let spec = stft(&Waveform::from_samples(noise(8000, 6, 0.5), 16000), &cfg).unwrap();
    let y1 = istft(&spec).unwrap();
    let scaled = ComplexSpectrum { data: spec.data.scale(2.5), config: spec.config.clone() };
    let y2 = istft(&scaled).unwrap();
    for (a, b) in y1.samples.data().iter().zip(y2.samples.data()) {
        assert!((2.5 * a - b).abs() < 1e-9);
    }
}

#[test]
fn error_paths() {
    let cfg = StftConfig::default();
    let empty = Waveform::from_samples(vec![], 16000);
    assert!(matches!(stft(&empty, &cfg), Err(DspError::EmptyInput)));

    let wrong_rate = Waveform::from_samples(vec![0.1; 1000], 22050);
    assert!(matches!(stft(&wrong_rate, &cfg), Err(DspError::SampleRate { .. })));

    let short = Waveform::from_samples(vec![0.1; 319], 16000);
    assert!(matches!(stft(&short, &cfg), Err(DspError::TooShort { .. })));

    let degenerate =
        ComplexSpectrum { data: Tensor::zeros(&[2, 192, 0]), config: StftConfig::default() };
    assert!(matches!(istft(&degenerate), Err(DspError::NoFrames)));

    let bad = StftConfig { n_fft: 100, ..StftConfig::default() };
    assert!(matches!(bad.validate(), Err(DspError::InvalidConfig(_))));
    let bad = StftConfig { hop_length: 77, ..StftConfig::default() };
    assert!(matches!(bad.validate(), Err(DspError::InvalidConfig(_))));
}
