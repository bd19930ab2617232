//! Windowed multi-head self-attention over feature maps, with cyclic
//! shifting, learned relative position bias, and the pre-norm
//! attention/MLP sub-block built from it.

use crate::layers::{select_rows, Builder, Ctx, Linear, P};
use autograd::Tensor;
use std::rc::Rc;

/// Additive logit that zeroes a softmax entry exactly.
const MASK: f64 = -1e30;

/// Largest divisor of `extent` that is at most `configured`, so windows
/// always tile the map exactly.
pub fn effective_window(extent: usize, configured: usize) -> usize {
    (1..=configured.min(extent)).rev().find(|d| extent % d == 0).unwrap_or(1)
}

/// Window tiling for one map size: a gather order grouping tokens by
/// window (after the cyclic shift), its inverse, and per-window additive
/// masks that stop shifted windows from attending across the wrap seam.
pub struct WindowPlan {
    pub eff_w: usize,
    pub num_windows: usize,
    pub tokens_per_window: usize,
    pub gather: Vec<usize>,
    pub inverse: Vec<usize>,
    pub masks: Vec<Option<Vec<f64>>>,
}

pub fn build_plan(h: usize, w: usize, wf: usize, wt: usize, shifted: bool) -> WindowPlan {
    let eff_h = effective_window(h, wf);
    let eff_w = effective_window(w, wt);
    let sh = if shifted && eff_h < h { eff_h / 2 } else { 0 };
    let sw = if shifted && eff_w < w { eff_w / 2 } else { 0 };
    let (nh, nw) = (h / eff_h, w / eff_w);
    let p = eff_h * eff_w;

    let mut gather = Vec::with_capacity(h * w);
    for a in 0..nh {
        for b in 0..nw {
            for i in 0..eff_h {
                for j in 0..eff_w {
                    let oh = (a * eff_h + i + sh) % h;
                    let ow = (b * eff_w + j + sw) % w;
                    gather.push(oh * w + ow);
                }
            }
        }
    }
    let mut inverse = vec![0usize; h * w];
    for (pos, &src) in gather.iter().enumerate() {
        inverse[src] = pos;
    }

    // Region ids on the original grid; tokens from different regions meet
    // only inside seam windows and must not attend to each other there.
    let region = |o: usize, extent: usize, eff: usize, shift: usize| -> usize {
        if o < extent - eff {
            0
        } else if o < extent - shift {
            1
        } else {
            2
        }
    };
    let mut masks = Vec::with_capacity(nh * nw);
    if sh == 0 && sw == 0 {
        masks.resize_with(nh * nw, || None);
    } else {
        for win in 0..nh * nw {
            let ids: Vec<usize> = (0..p)
                .map(|pos| {
                    let src = gather[win * p + pos];
                    region(src / w, h, eff_h, sh) * 3 + region(src % w, w, eff_w, sw)
                })
                .collect();
            if ids.iter().all(|&id| id == ids[0]) {
                masks.push(None);
            } else {
                let mut m = vec![0.0; p * p];
                for a in 0..p {
                    for b in 0..p {
                        if ids[a] != ids[b] {
                            m[a * p + b] = MASK;
                        }
                    }
                }
                masks.push(Some(m));
            }
        }
    }

    WindowPlan { eff_w, num_windows: nh * nw, tokens_per_window: p, gather, inverse, masks }
}

/// One pre-norm transformer sub-block: windowed attention with a residual
/// add, then a GELU MLP with a residual add.
pub struct AttnBlock {
    pub dim: usize,
    pub heads: usize,
    pub shifted: bool,
    window_freq: usize,
    window_time: usize,
    ln1_g: P,
    ln1_b: P,
    qkv: Linear,
    proj: Linear,
    rpb: Option<P>,
    ln2_g: P,
    ln2_b: P,
    fc1: Linear,
    fc2: Linear,
}

impl AttnBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        b: &mut Builder,
        name: &str,
        dim: usize,
        heads: usize,
        shifted: bool,
        window_freq: usize,
        window_time: usize,
        mlp_ratio: f64,
        position_bias: bool,
    ) -> Self {
        let hidden = ((dim as f64) * mlp_ratio).round() as usize;
        let entries = (2 * window_freq - 1) * (2 * window_time - 1);
        Self {
            dim,
            heads,
            shifted,
            window_freq,
            window_time,
            ln1_g: b.ones(format!("{name}.ln1.g"), &[dim]),
            ln1_b: b.zeros(format!("{name}.ln1.b"), &[dim]),
            qkv: b.linear(&format!("{name}.qkv"), dim, 3 * dim, true),
            proj: b.linear(&format!("{name}.proj"), dim, dim, true),
            rpb: position_bias.then(|| b.zeros(format!("{name}.rpb"), &[entries, heads])),
            ln2_g: b.ones(format!("{name}.ln2.g"), &[dim]),
            ln2_b: b.zeros(format!("{name}.ln2.b"), &[dim]),
            fc1: b.linear(&format!("{name}.mlp1"), dim, hidden, true),
            fc2: b.linear(&format!("{name}.mlp2"), hidden, dim, true),
        }
    }

    /// Per-head relative-position bias matrices for one window shape,
    /// gathered from the shared table.
    fn bias_matrices(&self, plan: &WindowPlan, ctx: &Ctx) -> Option<Vec<Tensor>> {
        let table = ctx.param(self.rpb.as_ref()?);
        let (wf, wt) = (self.window_freq, self.window_time);
        let p = plan.tokens_per_window;
        let coord = |pos: usize| (pos / plan.eff_w, pos % plan.eff_w);
        let mut mats = Vec::with_capacity(self.heads);
        for hd in 0..self.heads {
            let mut idx = Vec::with_capacity(p * p);
            for a in 0..p {
                let (i, j) = coord(a);
                for b in 0..p {
                    let (i2, j2) = coord(b);
                    let entry = (i + wf - 1 - i2) * (2 * wt - 1) + (j + wt - 1 - j2);
                    idx.push(entry * self.heads + hd);
                }
            }
            mats.push(table.gather(Rc::new(idx), &[p, p]));
        }
        Some(mats)
    }

    /// Windowed attention over normalized tokens laid out row-major for an
    /// `h` by `w` map. Returns tokens in the original order.
    pub fn attend(&self, tokens: &Tensor, h: usize, w: usize, ctx: &Ctx) -> Tensor {
        let c = self.dim;
        let dh = c / self.heads;
        let plan = build_plan(h, w, self.window_freq, self.window_time, self.shifted);
        let p = plan.tokens_per_window;

        let qkv = self.qkv.forward(tokens, ctx);
        let qkv_w = select_rows(&qkv, &plan.gather);
        let bias = self.bias_matrices(&plan, ctx);
        let masks: Vec<Option<Tensor>> = plan
            .masks
            .iter()
            .map(|m| m.as_ref().map(|v| Tensor::constant(v.clone(), &[p, p])))
            .collect();

        let scale = 1.0 / (dh as f64).sqrt();
        let mut outputs = Vec::with_capacity(plan.num_windows);
        for wi in 0..plan.num_windows {
            let rows = qkv_w.slice(0, wi * p, (wi + 1) * p);
            let mut heads = Vec::with_capacity(self.heads);
            for hd in 0..self.heads {
                let q = rows.slice(1, hd * dh, (hd + 1) * dh);
                let k = rows.slice(1, c + hd * dh, c + (hd + 1) * dh);
                let v = rows.slice(1, 2 * c + hd * dh, 2 * c + (hd + 1) * dh);
                let mut scores = q.matmul(&k.transpose(0, 1)).scale(scale);
                if let Some(b) = &bias {
                    scores = scores.add(&b[hd]);
                }
                if let Some(m) = &masks[wi] {
                    scores = scores.add(m);
                }
                heads.push(scores.softmax_last().matmul(&v));
            }
            let refs: Vec<&Tensor> = heads.iter().collect();
            outputs.push(Tensor::concat(1, &refs));
        }
        let refs: Vec<&Tensor> = outputs.iter().collect();
        let merged = Tensor::concat(0, &refs);
        let restored = select_rows(&merged, &plan.inverse);
        self.proj.forward(&restored, ctx)
    }

    /// Full sub-block over a `[C, H, W]` feature map.
    pub fn forward(&self, x: &Tensor, ctx: &Ctx) -> Tensor {
        let s = x.shape();
        let (c, h, w) = (s[0], s[1], s[2]);
        debug_assert_eq!(c, self.dim);
        let eps = 1e-5;
        let tokens = x.permute(&[1, 2, 0]).reshape(&[h * w, c]);

        let normed = tokens.layer_norm(&ctx.param(&self.ln1_g), &ctx.param(&self.ln1_b), eps);
        let tokens = tokens.add(&self.attend(&normed, h, w, ctx));

        let normed = tokens.layer_norm(&ctx.param(&self.ln2_g), &ctx.param(&self.ln2_b), eps);
        let mlp = self.fc2.forward(&self.fc1.forward(&normed, ctx).gelu(), ctx);
        let tokens = tokens.add(&mlp);

        tokens.reshape(&[h, w, c]).permute(&[2, 0, 1])
    }
}
