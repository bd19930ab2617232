//! Scalable bitstream container: a fixed 24-byte header followed by one
//! independently byte-aligned block per stream, codes packed MSB-first.
//! Cutting the file after any whole stream leaves a decodable payload at
//! the reduced stream count.

use crate::csrvq::EncodedPayload;

pub const MAGIC: [u8; 4] = *b"ESC1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum BitstreamError {
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    BadVersion(u8),
    #[error("file shorter than the {HEADER_LEN}-byte header")]
    ShortHeader,
    #[error("invalid header field: {0}")]
    BadField(&'static str),
    #[error("payload truncated: only {got} of {expected} streams present")]
    Truncated { expected: usize, got: usize },
    #[error("{0} trailing bytes after the last stream")]
    TrailingBytes(usize),
    #[error("nonzero padding bits at the end of stream {stream}")]
    DirtyPadding { stream: usize },
    #[error("code {code} does not fit in {bits} bits")]
    CodeRange { code: u32, bits: u8 },
    #[error("stream {stream} has {got} codes, expected {expected}")]
    CodeCount { stream: usize, expected: usize, got: usize },
}

/// Bytes one stream occupies: its codes bit-packed, zero-padded to a byte.
pub fn stream_bytes(frame_groups: usize, product_size: usize, bits: u8) -> usize {
    (frame_groups * product_size * bits as usize + 7) / 8
}

struct BitWriter {
    out: Vec<u8>,
    cur: u8,
    filled: u8,
}

impl BitWriter {
    fn new() -> Self {
        Self { out: Vec::new(), cur: 0, filled: 0 }
    }

    fn put(&mut self, value: u32, bits: u8) {
        for i in (0..bits).rev() {
            self.cur = (self.cur << 1) | ((value >> i) & 1) as u8;
            self.filled += 1;
            if self.filled == 8 {
                self.out.push(self.cur);
                self.cur = 0;
                self.filled = 0;
            }
        }
    }

    fn finish(mut self) -> Vec<u8> {
        if self.filled > 0 {
            self.out.push(self.cur << (8 - self.filled));
        }
        self.out
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> BitReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn get(&mut self, bits: u8) -> u32 {
        let mut v = 0u32;
        for _ in 0..bits {
            let byte = self.bytes[self.pos / 8];
            let bit = (byte >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u32;
            self.pos += 1;
        }
        v
    }

    fn rest_is_zero(&self) -> bool {
        let mut p = self.pos;
        while p < self.bytes.len() * 8 {
            if (self.bytes[p / 8] >> (7 - p % 8)) & 1 != 0 {
                return false;
            }
            p += 1;
        }
        true
    }
}

pub fn pack(p: &EncodedPayload) -> Result<Vec<u8>, BitstreamError> {
    if p.num_streams == 0 || p.codes.len() != p.num_streams as usize {
        return Err(BitstreamError::BadField("num_streams"));
    }
    if p.frame_groups == 0 {
        return Err(BitstreamError::BadField("frame_groups"));
    }
    if p.product_size == 0 {
        return Err(BitstreamError::BadField("product_size"));
    }
    if p.codebook_bits == 0 || p.codebook_bits > 32 {
        return Err(BitstreamError::BadField("codebook_bits"));
    }
    let per_stream = p.frame_groups as usize * p.product_size as usize;
    let limit = if p.codebook_bits == 32 { u32::MAX } else { (1u32 << p.codebook_bits) - 1 };

    let mut out = Vec::with_capacity(
        HEADER_LEN + p.num_streams as usize * stream_bytes(p.frame_groups as usize, p.product_size as usize, p.codebook_bits),
    );
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&p.sample_rate.to_le_bytes());
    out.push(p.num_streams);
    out.extend_from_slice(&p.frame_groups.to_le_bytes());
    out.push(p.product_size);
    out.push(p.codebook_bits);
    out.extend_from_slice(&p.fingerprint.to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);

    for (si, stream) in p.codes.iter().enumerate() {
        if stream.len() != per_stream {
            return Err(BitstreamError::CodeCount { stream: si, expected: per_stream, got: stream.len() });
        }
        let mut w = BitWriter::new();
        for &code in stream {
            if code > limit {
                return Err(BitstreamError::CodeRange { code, bits: p.codebook_bits });
            }
            w.put(code, p.codebook_bits);
        }
        out.extend_from_slice(&w.finish());
    }
    Ok(out)
}

/// Parses a container. With `lenient` set, a payload cut after any whole
/// stream is returned at the reduced stream count (partial trailing
/// streams are dropped); otherwise truncation is an error.
pub fn unpack(bytes: &[u8], lenient: bool) -> Result<EncodedPayload, BitstreamError> {
    if bytes.len() < HEADER_LEN {
        return Err(BitstreamError::ShortHeader);
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(BitstreamError::BadMagic(magic));
    }
    let version = bytes[4];
    if version != VERSION {
        return Err(BitstreamError::BadVersion(version));
    }
    let sample_rate = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
    let num_streams = bytes[9];
    let frame_groups = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
    let product_size = bytes[14];
    let codebook_bits = bytes[15];
    let fingerprint = u64::from_le_bytes(bytes[16..24].try_into().unwrap());

    if num_streams == 0 {
        return Err(BitstreamError::BadField("num_streams"));
    }
    if frame_groups == 0 {
        return Err(BitstreamError::BadField("frame_groups"));
    }
    if product_size == 0 {
        return Err(BitstreamError::BadField("product_size"));
    }
    if codebook_bits == 0 || codebook_bits > 32 {
        return Err(BitstreamError::BadField("codebook_bits"));
    }

    let per_stream = frame_groups as usize * product_size as usize;
    let sb = stream_bytes(frame_groups as usize, product_size as usize, codebook_bits);
    let body = &bytes[HEADER_LEN..];
    let whole = body.len() / sb;
    let declared = num_streams as usize;

    let avail = if whole >= declared {
        if body.len() > declared * sb {
            return Err(BitstreamError::TrailingBytes(body.len() - declared * sb));
        }
        declared
    } else if lenient && whole >= 1 {
        whole
    } else {
        return Err(BitstreamError::Truncated { expected: declared, got: whole });
    };

    let mut codes = Vec::with_capacity(avail);
    for si in 0..avail {
        let chunk = &body[si * sb..(si + 1) * sb];
        let mut r = BitReader::new(chunk);
        let stream: Vec<u32> = (0..per_stream).map(|_| r.get(codebook_bits)).collect();
        if !r.rest_is_zero() {
            return Err(BitstreamError::DirtyPadding { stream: si });
        }
        codes.push(stream);
    }

    Ok(EncodedPayload {
        num_streams: avail as u8,
        frame_groups,
        codes,
        fingerprint,
        sample_rate,
        product_size,
        codebook_bits,
    })
}

/// Payload bitrate in kilobits per second, headers and padding excluded.
pub fn bitrate_kbps(p: &EncodedPayload, duration_s: f64) -> f64 {
    p.total_bits() as f64 / duration_s / 1000.0
}
