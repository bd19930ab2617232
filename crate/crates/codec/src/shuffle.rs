//! Frequency-axis resampling: pixel-unshuffle folds `v` adjacent frequency
//! rows into channels before a linear width change (downsample), and the
//! upsample applies the inverse rearrangement after its projection.

use crate::error::CodecError;
use crate::layers::{Ctx, Linear};
use autograd::Tensor;
use std::rc::Rc;

/// `[C, H, W]` to `[vC, H/v, W]`. Output channel `j*C + c` at row `g`
/// holds input channel `c` at row `g*v + j`.
pub fn pixel_unshuffle(x: &Tensor, v: usize) -> Result<Tensor, CodecError> {
    let s = x.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    if h % v != 0 {
        return Err(CodecError::DimMismatch { what: "height divisible by scale_factor", expected: v, got: h });
    }
    let hv = h / v;
    let mut idx = Vec::with_capacity(c * h * w);
    for k in 0..v * c {
        let (j, ci) = (k / c, k % c);
        for g in 0..hv {
            let row = g * v + j;
            let base = ci * h * w + row * w;
            idx.extend(base..base + w);
        }
    }
    Ok(x.gather(Rc::new(idx), &[v * c, hv, w]))
}

/// Inverse of `pixel_unshuffle`: `[vC, H, W]` to `[C, vH, W]`.
pub fn pixel_shuffle(x: &Tensor, v: usize) -> Result<Tensor, CodecError> {
    let s = x.shape();
    let (vc, h, w) = (s[0], s[1], s[2]);
    if vc % v != 0 {
        return Err(CodecError::DimMismatch { what: "channels divisible by scale_factor", expected: v, got: vc });
    }
    let c = vc / v;
    let mut idx = Vec::with_capacity(vc * h * w);
    for ci in 0..c {
        for row in 0..v * h {
            let src_ch = (row % v) * c + ci;
            let base = src_ch * h * w + (row / v) * w;
            idx.extend(base..base + w);
        }
    }
    Ok(x.gather(Rc::new(idx), &[c, v * h, w]))
}

fn to_tokens(x: &Tensor) -> Tensor {
    let s = x.shape();
    x.permute(&[1, 2, 0]).reshape(&[s[1] * s[2], s[0]])
}

fn from_tokens(x: &Tensor, h: usize, w: usize) -> Tensor {
    let c = x.shape()[1];
    x.reshape(&[h, w, c]).permute(&[2, 0, 1])
}

/// Downsample: unshuffle then project `vC -> c_out` per token.
pub struct Downsample {
    pub proj: Linear,
    pub v: usize,
}

impl Downsample {
    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor, CodecError> {
        let folded = pixel_unshuffle(x, self.v)?;
        let (h, w) = (folded.shape()[1], folded.shape()[2]);
        let tokens = self.proj.forward(&to_tokens(&folded), ctx);
        Ok(from_tokens(&tokens, h, w))
    }
}

/// Upsample: project `C -> v*c_out` per token, then shuffle rows back out.
pub struct Upsample {
    pub proj: Linear,
    pub v: usize,
}

impl Upsample {
    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Result<Tensor, CodecError> {
        let s = x.shape();
        let (h, w) = (s[1], s[2]);
        let tokens = self.proj.forward(&to_tokens(x), ctx);
        pixel_shuffle(&from_tokens(&tokens, h, w), self.v)
    }
}
