//! Model configuration: architecture and quantizer sizing, canonical
//! key=value serialization, and the fingerprint embedded in bitstreams.

use crate::error::CodecError;
use dsp::StftConfig;

/// Transformer architecture. `layer_dims[i]` is the channel width after
/// encoder layer `i+1`; the patch embedding width equals `layer_dims[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchConfig {
    pub patch_freq: usize,
    pub patch_time: usize,
    pub layer_dims: Vec<usize>,
    pub attention_heads: Vec<usize>,
    /// Attention sub-blocks per layer; even entries attend over plain
    /// windows, odd entries over shifted windows.
    pub block_depth: usize,
    /// Frequency-axis up/down-sampling factor per layer.
    pub scale_factor: usize,
    pub window_freq: usize,
    pub window_time: usize,
    pub mlp_ratio: f64,
    pub position_bias: bool,
}

impl Default for ArchConfig {
    fn default() -> Self {
        Self {
            patch_freq: 3,
            patch_time: 2,
            layer_dims: vec![45, 72, 96, 144, 192, 384],
            attention_heads: vec![3, 3, 6, 12, 24, 24],
            block_depth: 2,
            scale_factor: 2,
            window_freq: 4,
            window_time: 8,
            mlp_ratio: 2.0,
            position_bias: true,
        }
    }
}

/// Product vector-quantizer sizing, shared by every stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VqConfig {
    /// Number of product groups `l` a frame vector is split into.
    pub product_size: usize,
    /// Codewords per group codebook.
    pub codebook_size: usize,
    /// Factorized code dimension `u` each group is projected to.
    pub code_dim: usize,
}

impl Default for VqConfig {
    fn default() -> Self {
        Self { product_size: 3, codebook_size: 1024, code_dim: 8 }
    }
}

/// Quantizer placement: cross-scale (one residual stage per decoder scale)
/// or the plain residual-VQ baseline with every stage at the bottleneck.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecMode {
    CrossScale,
    Rvq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CodecConfig {
    pub stft: StftConfig,
    pub arch: ArchConfig,
    pub vq: VqConfig,
    pub mode: CodecMode,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            arch: ArchConfig::default(),
            vq: VqConfig::default(),
            mode: CodecMode::CrossScale,
        }
    }
}

impl CodecConfig {
    pub fn num_layers(&self) -> usize {
        self.arch.layer_dims.len()
    }

    /// Channel width at scale `k`: the patch embedding for `k == 0`,
    /// otherwise the output of encoder layer `k`.
    pub fn dim_at_scale(&self, k: usize) -> usize {
        if k == 0 { self.arch.layer_dims[0] } else { self.arch.layer_dims[k - 1] }
    }

    /// Patch-grid height (frequency tokens) before any downsampling.
    pub fn patch_height(&self) -> usize {
        self.stft.num_bins() / self.arch.patch_freq
    }

    /// Frequency extent at scale `k`.
    pub fn height_at_scale(&self, k: usize) -> usize {
        self.patch_height() / self.arch.scale_factor.pow(k as u32)
    }

    /// Flattened frame dimension handled by quantizer `i`: two merged time
    /// frames at the scale the stage taps. Stages 0 and 1 sit at the
    /// bottleneck; stage `i >= 2` taps scale `n-i+1`. In RVQ mode every
    /// stage sits at the bottleneck.
    pub fn quantizer_dims(&self) -> Vec<usize> {
        let n = self.num_layers();
        let at = |k: usize| 2 * self.dim_at_scale(k) * self.height_at_scale(k);
        (0..n)
            .map(|i| match self.mode {
                CodecMode::Rvq => at(n),
                CodecMode::CrossScale if i <= 1 => at(n),
                CodecMode::CrossScale => at(n - i + 1),
            })
            .collect()
    }

    /// Bits used to store one code index.
    pub fn code_bits(&self) -> u8 {
        (64 - (self.vq.codebook_size as u64 - 1).leading_zeros()) as u8
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        let bad = |m: String| Err(CodecError::InvalidConfig(m));
        self.stft.validate().map_err(CodecError::Dsp)?;
        let a = &self.arch;
        if a.layer_dims.is_empty() {
            return bad("layer_dims must be non-empty".into());
        }
        if a.layer_dims.len() != a.attention_heads.len() {
            return bad(format!(
                "layer_dims has {} entries but attention_heads has {}",
                a.layer_dims.len(),
                a.attention_heads.len()
            ));
        }
        for (c, h) in a.layer_dims.iter().zip(&a.attention_heads) {
            if *h == 0 || c % h != 0 {
                return bad(format!("width {c} not divisible by {h} heads"));
            }
        }
        if a.patch_freq == 0 || a.patch_time == 0 {
            return bad("patch dims must be positive".into());
        }
        if a.block_depth == 0 {
            return bad("block_depth must be positive".into());
        }
        if a.scale_factor < 1 {
            return bad("scale_factor must be at least 1".into());
        }
        if a.window_freq == 0 || a.window_time == 0 {
            return bad("window dims must be positive".into());
        }
        if !(a.mlp_ratio > 0.0) {
            return bad("mlp_ratio must be positive".into());
        }
        let bins = self.stft.num_bins();
        if bins % a.patch_freq != 0 {
            return bad(format!("{bins} frequency bins not divisible by patch_freq {}", a.patch_freq));
        }
        let h0 = self.patch_height();
        let total = a.scale_factor.checked_pow(self.num_layers() as u32);
        match total {
            Some(t) if h0 % t == 0 => {}
            _ => {
                return bad(format!(
                    "patch height {h0} not divisible by scale_factor^{} ",
                    self.num_layers()
                ))
            }
        }
        let v = &self.vq;
        if v.product_size == 0 || v.code_dim == 0 {
            return bad("product_size and code_dim must be positive".into());
        }
        if v.codebook_size < 2 {
            return bad("codebook_size must be at least 2".into());
        }
        if self.code_bits() > 32 {
            return bad("codebook_size too large for 32-bit codes".into());
        }
        for (i, d) in self.quantizer_dims().iter().enumerate() {
            if d % v.product_size != 0 {
                return bad(format!(
                    "quantizer {i} frame dim {d} not divisible by product_size {}",
                    v.product_size
                ));
            }
        }
        Ok(())
    }

    /// Canonical serialization: sorted `key=value` lines. This is what the
    /// fingerprint hashes and what checkpoints embed.
    pub fn canonical_string(&self) -> String {
        let join = |v: &[usize]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut lines = vec![
            format!("arch.attention_heads={}", join(&self.arch.attention_heads)),
            format!("arch.block_depth={}", self.arch.block_depth),
            format!("arch.layer_dims={}", join(&self.arch.layer_dims)),
            format!("arch.mlp_ratio={}", self.arch.mlp_ratio),
            format!("arch.patch_freq={}", self.arch.patch_freq),
            format!("arch.patch_time={}", self.arch.patch_time),
            format!("arch.position_bias={}", self.arch.position_bias),
            format!("arch.scale_factor={}", self.arch.scale_factor),
            format!("arch.window_freq={}", self.arch.window_freq),
            format!("arch.window_time={}", self.arch.window_time),
            format!("mode={}", match self.mode {
                CodecMode::CrossScale => "cross_scale",
                CodecMode::Rvq => "rvq",
            }),
            format!("stft.hop_length={}", self.stft.hop_length),
            format!("stft.n_fft={}", self.stft.n_fft),
            format!("stft.sample_rate={}", self.stft.sample_rate),
            format!("stft.win_length={}", self.stft.win_length),
            format!("vq.code_dim={}", self.vq.code_dim),
            format!("vq.codebook_size={}", self.vq.codebook_size),
            format!("vq.product_size={}", self.vq.product_size),
        ];
        lines.sort();
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    /// FNV-1a hash of the canonical serialization; stored in bitstream
    /// headers so decoders can reject payloads from a different model shape.
    pub fn fingerprint(&self) -> u64 {
        fnv1a64(self.canonical_string().as_bytes())
    }

    /// Sets one dotted `key=value` field. Returns false when the key does
    /// not belong to this config (so callers can try other consumers).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<bool, CodecError> {
        let bad = |k: &str, v: &str| CodecError::InvalidConfig(format!("bad value {v:?} for {k}"));
        let parse_usize = |v: &str, k: &str| v.trim().parse::<usize>().map_err(|_| bad(k, v));
        let parse_list = |v: &str, k: &str| -> Result<Vec<usize>, CodecError> {
            v.split(',').map(|x| x.trim().parse::<usize>().map_err(|_| bad(k, v))).collect()
        };
        match key {
            "arch.patch_freq" => self.arch.patch_freq = parse_usize(value, key)?,
            "arch.patch_time" => self.arch.patch_time = parse_usize(value, key)?,
            "arch.layer_dims" => self.arch.layer_dims = parse_list(value, key)?,
            "arch.attention_heads" => self.arch.attention_heads = parse_list(value, key)?,
            "arch.block_depth" => self.arch.block_depth = parse_usize(value, key)?,
            "arch.scale_factor" => self.arch.scale_factor = parse_usize(value, key)?,
            "arch.window_freq" => self.arch.window_freq = parse_usize(value, key)?,
            "arch.window_time" => self.arch.window_time = parse_usize(value, key)?,
            "arch.mlp_ratio" => {
                self.arch.mlp_ratio = value.trim().parse::<f64>().map_err(|_| bad(key, value))?
            }
            "arch.position_bias" => {
                self.arch.position_bias = value.trim().parse::<bool>().map_err(|_| bad(key, value))?
            }
            "mode" => {
                self.mode = match value.trim() {
                    "cross_scale" => CodecMode::CrossScale,
                    "rvq" => CodecMode::Rvq,
                    _ => return Err(bad(key, value)),
                }
            }
            "stft.sample_rate" => {
                self.stft.sample_rate = value.trim().parse::<u32>().map_err(|_| bad(key, value))?
            }
            "stft.win_length" => self.stft.win_length = parse_usize(value, key)?,
            "stft.hop_length" => self.stft.hop_length = parse_usize(value, key)?,
            "stft.n_fft" => self.stft.n_fft = parse_usize(value, key)?,
            "vq.product_size" => self.vq.product_size = parse_usize(value, key)?,
            "vq.codebook_size" => self.vq.codebook_size = parse_usize(value, key)?,
            "vq.code_dim" => self.vq.code_dim = parse_usize(value, key)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Parses a canonical serialization produced by `canonical_string`.
    pub fn from_canonical(text: &str) -> Result<Self, CodecError> {
        let mut cfg = Self::default();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CodecError::InvalidConfig(format!("malformed line {line:?}")))?;
            if !cfg.apply(k, v)? {
                return Err(CodecError::InvalidConfig(format!("unknown key {k:?}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Small three-layer shape used by the training smoke tests.
    pub fn toy() -> Self {
        let mut cfg = Self::default();
        cfg.stft = StftConfig { sample_rate: 16000, win_length: 40, hop_length: 20, n_fft: 46, ..StftConfig::default() };
        cfg.arch.layer_dims = vec![8, 16, 32];
        cfg.arch.attention_heads = vec![1, 2, 4];
        cfg.vq = VqConfig { product_size: 2, codebook_size: 16, code_dim: 8 };
        cfg
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}
