//! WAV reader/writer round-trip and format rejection.

use autograd::rng;
use dsp::{read_wav, write_wav, DspError};

#[test]
fn round_trip_within_quantization_step() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.wav");
    let mut r = rng::seeded(1);
    let samples: Vec<f64> = rng::uniform_vec(&mut r, 4321, -0.9, 0.9);
    write_wav(&path, &samples, 16000).unwrap();
    let (back, rate) = read_wav(&path).unwrap();
    assert_eq!(rate, 16000);
    assert_eq!(back.len(), samples.len());
    for (a, b) in samples.iter().zip(&back) {
        assert!((a - b).abs() <= 0.5 / 32768.0 + 1e-12);
    }
}

fn wav_bytes(format: u16, channels: u16, bits: u16) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&40u32.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&channels.to_le_bytes());
    out.extend_from_slice(&16000u32.to_le_bytes());
    out.extend_from_slice(&32000u32.to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    out
}

#[test]
fn rejects_unsupported_formats_with_explanations() {
    let dir = tempfile::tempdir().unwrap();

    let cases = [
        (wav_bytes(3, 1, 16), "PCM"),
        (wav_bytes(1, 2, 16), "mono"),
        (wav_bytes(1, 1, 8), "16-bit"),
    ];
    for (i, (bytes, needle)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.wav"));
        std::fs::write(&path, bytes).unwrap();
        match read_wav(&path) {
            Err(DspError::Wav(msg)) => {
                assert!(msg.contains(needle), "message {msg:?} lacks {needle:?}")
            }
            other => panic!("expected wav error, got {other:?}"),
        }
    }

    let path = dir.path().join("garbage.bin");
    std::fs::write(&path, b"not a wave file at all").unwrap();
    assert!(matches!(read_wav(&path), Err(DspError::Wav(_))));
}

#[test]
fn clipping_is_saturating() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("clip.wav");
    write_wav(&path, &[2.0, -2.0, 0.0], 16000).unwrap();
    let (back, _) = read_wav(&path).unwrap();
    assert!((back[0] - 32767.0 / 32768.0).abs() < 1e-12);
    assert_eq!(back[1], -1.0);
    assert_eq!(back[2], 0.0);
}
