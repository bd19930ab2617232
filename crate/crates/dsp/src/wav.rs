//! Minimal WAV I/O: PCM 16-bit little-endian mono only. Anything else is
//! rejected with an explanatory error; there is no silent resampling.

use std::fs;
use std::path::Path;

use crate::error::DspError;

fn wav_err(m: impl Into<String>) -> DspError {
    DspError::Wav(m.into())
}

/// Reads a mono PCM16 WAV file. Returns samples scaled to [-1, 1) and the
/// file's sample rate.
pub fn read_wav(path: &Path) -> Result<(Vec<f64>, u32), DspError> {
    let bytes = fs::read(path)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(wav_err("not a RIFF/WAVE file"));
    }

    let mut pos = 12usize;
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_end = pos + 8 + size;
        if body_end > bytes.len() {
            return Err(wav_err("truncated chunk"));
        }
        let body = &bytes[pos + 8..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(wav_err("fmt chunk too small"));
                }
                let format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        pos = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| wav_err("missing fmt chunk"))?;
    if format != 1 {
        return Err(wav_err(format!("unsupported format tag {format}, only PCM (1) is read")));
    }
    if channels != 1 {
        return Err(wav_err(format!("unsupported channel count {channels}, only mono is read")));
    }
    if bits != 16 {
        return Err(wav_err(format!("unsupported bit depth {bits}, only 16-bit is read")));
    }
    let data = data.ok_or_else(|| wav_err("missing data chunk"))?;
    if data.len() % 2 != 0 {
        return Err(wav_err("data chunk has odd byte length"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect();
    Ok((samples, rate))
}

/// Writes a mono PCM16 WAV file. Samples are clipped to [-1, 1).
pub fn write_wav(path: &Path, samples: &[f64], sample_rate: u32) -> Result<(), DspError> {
    let data_len = samples.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &v in samples {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}
