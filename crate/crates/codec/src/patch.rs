//! Spectrum patching: non-overlapping real/imaginary patches are flattened
//! and linearly embedded into tokens, and the inverse projects tokens back
//! to a complex spectrum.

use crate::error::CodecError;
use crate::layers::{Ctx, Linear};
use autograd::Tensor;
use std::rc::Rc;

/// Values per patch: both complex components times the patch area.
pub fn patch_len(pf: usize, pt: usize) -> usize {
    2 * pf * pt
}

fn check_grid(shape: &[usize], pf: usize, pt: usize) -> Result<(usize, usize), CodecError> {
    if shape.len() != 3 || shape[0] != 2 {
        return Err(CodecError::InvalidConfig(format!(
            "expected a [2, bins, frames] spectrum, got {shape:?}"
        )));
    }
    let (f, t) = (shape[1], shape[2]);
    if f % pf != 0 {
        return Err(CodecError::DimMismatch { what: "bins divisible by patch_freq", expected: pf, got: f });
    }
    if t % pt != 0 {
        return Err(CodecError::DimMismatch { what: "frames divisible by patch_time", expected: pt, got: t });
    }
    Ok((f, t))
}

/// `[2, F, T]` spectrum data to a `[C0, F/pf, T/pt]` feature map. Each
/// patch is flattened component-major, then frequency, then time.
pub fn patchify(
    spec: &Tensor,
    embed: &Linear,
    pf: usize,
    pt: usize,
    ctx: &Ctx,
) -> Result<Tensor, CodecError> {
    let (f, t) = check_grid(spec.shape(), pf, pt)?;
    let (h, w) = (f / pf, t / pt);
    let plen = patch_len(pf, pt);
    let mut idx = Vec::with_capacity(h * w * plen);
    for ph in 0..h {
        for pw in 0..w {
            for c in 0..2 {
                for df in 0..pf {
                    for dt in 0..pt {
                        idx.push(c * f * t + (ph * pf + df) * t + (pw * pt + dt));
                    }
                }
            }
        }
    }
    let patches = spec.gather(Rc::new(idx), &[h * w, plen]);
    let tokens = embed.forward(&patches, ctx);
    let c0 = *tokens.shape().last().unwrap();
    Ok(tokens.transpose(0, 1).reshape(&[c0, h, w]))
}

/// Inverse of `patchify`: tokens back to a `[2, F, T]` spectrum.
pub fn depatchify(
    feat: &Tensor,
    deembed: &Linear,
    pf: usize,
    pt: usize,
    ctx: &Ctx,
) -> Result<Tensor, CodecError> {
    let shape = feat.shape();
    if shape.len() != 3 {
        return Err(CodecError::InvalidConfig(format!("expected a feature map, got {shape:?}")));
    }
    let (c0, h, w) = (shape[0], shape[1], shape[2]);
    let (f, t) = (h * pf, w * pt);
    let plen = patch_len(pf, pt);
    let tokens = feat.reshape(&[c0, h * w]).transpose(0, 1);
    let patches = deembed.forward(&tokens, ctx);
    if *patches.shape().last().unwrap() != plen {
        return Err(CodecError::DimMismatch {
            what: "patch projection width",
            expected: plen,
            got: *patches.shape().last().unwrap(),
        });
    }
    let mut idx = Vec::with_capacity(2 * f * t);
    for c in 0..2 {
        for fi in 0..f {
            for ti in 0..t {
                let token = (fi / pf) * w + ti / pt;
                let within = c * pf * pt + (fi % pf) * pt + ti % pt;
                idx.push(token * plen + within);
            }
        }
    }
    Ok(patches.gather(Rc::new(idx), &[2, f, t]))
}
