//! Encoder and decoder layers: the encoder halves the frequency extent and
//! widens channels before its attention blocks; the decoder mirrors it
//! with blocks first, then the upsample.

use crate::attention::AttnBlock;
use crate::config::CodecConfig;
use crate::error::CodecError;
use crate::layers::{Builder, Ctx};
use crate::shuffle::{Downsample, Upsample};
use autograd::Tensor;

/// A `[C, H, W]` map tagged with its scale: 0 at the patch grid, `k` after
/// `k` encoder layers (equivalently, `n-k` decoder layers from the
/// bottleneck).
pub struct FeatureMap {
    pub data: Tensor,
    pub scale: usize,
}

impl FeatureMap {
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.data.shape();
        (s[0], s[1], s[2])
    }
}

pub struct EncoderLayer {
    pub down: Downsample,
    pub blocks: Vec<AttnBlock>,
    pub scale: usize,
}

impl EncoderLayer {
    pub fn forward(&self, fm: &FeatureMap, ctx: &Ctx) -> Result<FeatureMap, CodecError> {
        if fm.scale + 1 != self.scale {
            return Err(CodecError::ScaleMismatch { expected: self.scale - 1, got: fm.scale });
        }
        let mut z = self.down.forward(&fm.data, ctx)?;
        for blk in &self.blocks {
            z = blk.forward(&z, ctx);
        }
        Ok(FeatureMap { data: z, scale: self.scale })
    }
}

pub struct DecoderLayer {
    pub blocks: Vec<AttnBlock>,
    pub up: Upsample,
    /// Scale of the map this layer consumes; it emits `scale - 1`.
    pub scale: usize,
}

impl DecoderLayer {
    pub fn forward(&self, fm: &FeatureMap, ctx: &Ctx) -> Result<FeatureMap, CodecError> {
        if fm.scale != self.scale {
            return Err(CodecError::ScaleMismatch { expected: self.scale, got: fm.scale });
        }
        let mut z = fm.data.clone();
        for blk in &self.blocks {
            z = blk.forward(&z, ctx);
        }
        Ok(FeatureMap { data: self.up.forward(&z, ctx)?, scale: self.scale - 1 })
    }
}

/// Runs every encoder layer, returning the map at each scale `1..=n`.
pub fn encoder_forward(
    layers: &[EncoderLayer],
    z0: &FeatureMap,
    ctx: &Ctx,
) -> Result<Vec<FeatureMap>, CodecError> {
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        let prev = out.last().unwrap_or(z0);
        out.push(layer.forward(prev, ctx)?);
    }
    Ok(out)
}

pub(crate) fn build_encoder(b: &mut Builder, cfg: &CodecConfig) -> Vec<EncoderLayer> {
    let a = &cfg.arch;
    let v = a.scale_factor;
    (0..cfg.num_layers())
        .map(|i| {
            let scale = i + 1;
            let (c_in, c_out) = (cfg.dim_at_scale(i), cfg.dim_at_scale(scale));
            let name = format!("enc.layer{scale}");
            let down = Downsample { proj: b.linear(&format!("{name}.down"), v * c_in, c_out, true), v };
            let blocks = (0..a.block_depth)
                .map(|d| {
                    AttnBlock::new(
                        b,
                        &format!("{name}.block{d}"),
                        c_out,
                        a.attention_heads[i],
                        d % 2 == 1,
                        a.window_freq,
                        a.window_time,
                        a.mlp_ratio,
                        a.position_bias,
                    )
                })
                .collect();
            EncoderLayer { down, blocks, scale }
        })
        .collect()
}

pub(crate) fn build_decoder(b: &mut Builder, cfg: &CodecConfig) -> Vec<DecoderLayer> {
    let a = &cfg.arch;
    let n = cfg.num_layers();
    let v = a.scale_factor;
    (0..n)
        .map(|i| {
            // Decoder layer i+1 works at scale n-i and emits scale n-i-1.
            let scale = n - i;
            let (c_in, c_out) = (cfg.dim_at_scale(scale), cfg.dim_at_scale(scale - 1));
            let name = format!("dec.layer{}", i + 1);
            let blocks = (0..a.block_depth)
                .map(|d| {
                    AttnBlock::new(
                        b,
                        &format!("{name}.block{d}"),
                        c_in,
                        a.attention_heads[scale - 1],
                        d % 2 == 1,
                        a.window_freq,
                        a.window_time,
                        a.mlp_ratio,
                        a.position_bias,
                    )
                })
                .collect();
            let up = Upsample { proj: b.linear(&format!("{name}.up"), c_in, v * c_out, true), v };
            DecoderLayer { blocks, up, scale }
        })
        .collect()
}
