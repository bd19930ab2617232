//! Product vector quantization: frame vectors are split into groups, each
//! projected to a small code space, matched against a normalized codebook,
//! and reconstructed through a learned up-projection with a
//! straight-through estimator.

use crate::config::VqConfig;
use crate::error::CodecError;
use crate::layers::{select_rows, Builder, Ctx, P};
use autograd::rng::{derive, normal_vec};
use autograd::{straight_through, Tensor};
use std::cell::{Cell, RefCell};
use std::rc::Rc;

const NORM_EPS: f64 = 1e-12;

/// Records stop-gradient values and code selections during a base forward
/// pass, then replays them during finite-difference probes so the
/// numerical gradient measures exactly what the tape computes. A replay
/// where the recomputed nearest-code selection disagrees with the recorded
/// one is flagged so the caller can exclude that coordinate.
#[derive(Default)]
pub struct Probe {
    replay: Cell<bool>,
    consts: RefCell<Vec<Rc<Vec<f64>>>>,
    cursor: Cell<usize>,
    codes: RefCell<Vec<u32>>,
    code_cursor: Cell<usize>,
    flipped: Cell<bool>,
    total_flips: Cell<u64>,
}

impl Probe {
    pub fn new() -> Self {
        Self::default()
    }

    /// Switches from recording to replaying; call before each probe pass.
    pub fn start_replay(&self) {
        self.replay.set(true);
        self.cursor.set(0);
        self.code_cursor.set(0);
        self.flipped.set(false);
    }

    /// True when a replayed code selection disagreed since the last
    /// `start_replay`.
    pub fn flipped(&self) -> bool {
        self.flipped.get()
    }

    /// Total code disagreements across every replay so far.
    pub fn total_flips(&self) -> u64 {
        self.total_flips.get()
    }

    fn sg(&self, t: &Tensor) -> Tensor {
        if self.replay.get() {
            let i = self.cursor.get();
            self.cursor.set(i + 1);
            Tensor::from_rc(self.consts.borrow()[i].clone(), t.shape())
        } else {
            self.consts.borrow_mut().push(t.rc_data());
            t.detach()
        }
    }

    fn code(&self, computed: u32) -> u32 {
        if self.replay.get() {
            let i = self.code_cursor.get();
            self.code_cursor.set(i + 1);
            let stored = self.codes.borrow()[i];
            if stored != computed {
                self.flipped.set(true);
                self.total_flips.set(self.total_flips.get() + 1);
            }
            stored
        } else {
            self.codes.borrow_mut().push(computed);
            computed
        }
    }
}

fn sg(t: &Tensor, probe: Option<&Probe>) -> Tensor {
    match probe {
        Some(p) => p.sg(t),
        None => t.detach(),
    }
}

/// Codebook-plus-commitment objective on already-projected vectors:
/// `||sg(a) - b||^2 + beta * ||a - sg(b)||^2`, summed over the code
/// dimension and averaged over frames.
pub fn vq_loss(a: &Tensor, b: &Tensor, beta: f64) -> Tensor {
    vq_loss_probed(a, b, beta, None)
}

fn vq_loss_probed(a: &Tensor, b: &Tensor, beta: f64, probe: Option<&Probe>) -> Tensor {
    let frames = a.shape()[0] as f64;
    let codebook = sg(a, probe).sub(b).square().sum().scale(1.0 / frames);
    let commit = a.sub(&sg(b, probe)).square().sum().scale(1.0 / frames);
    codebook.add(&commit.scale(beta))
}

/// Forwards the quantized value while routing gradients to both the input
/// and the quantized branch.
fn ste(z_e: &Tensor, z_q: &Tensor, probe: Option<&Probe>) -> Tensor {
    match probe {
        Some(p) => z_e.add(z_q).sub(&p.sg(z_e)),
        None => straight_through(z_e, z_q),
    }
}

/// Nearest codebook row per frame by squared distance; ties take the
/// lowest index. Operates on normalized vectors, `u` wide.
fn nearest_codes(a: &[f64], cb: &[f64], frames: usize, u: usize, k: usize) -> Vec<u32> {
    let mut out = Vec::with_capacity(frames);
    for fi in 0..frames {
        let row = &a[fi * u..(fi + 1) * u];
        let mut best = 0u32;
        let mut best_d = f64::INFINITY;
        for ki in 0..k {
            let c = &cb[ki * u..(ki + 1) * u];
            let mut d = 0.0;
            for j in 0..u {
                let t = row[j] - c[j];
                d += t * t;
            }
            if d < best_d {
                best_d = d;
                best = ki as u32;
            }
        }
        out.push(best);
    }
    out
}

pub struct VqGroup {
    pub w_in: P,
    pub w_out: P,
    pub codebook: P,
}

pub struct QuantOutput {
    /// `[frames, dim]` straight-through quantized frames.
    pub z_q: Tensor,
    /// One code per (frame, group), group index fastest.
    pub codes: Vec<u32>,
    pub vq_loss: Tensor,
}

/// One quantizer stage: `product_size` independent groups over a
/// `dim`-wide frame vector.
pub struct ProductVq {
    pub dim: usize,
    pub cfg: VqConfig,
    pub groups: Vec<VqGroup>,
}

impl ProductVq {
    pub fn new(b: &mut Builder, name: &str, dim: usize, cfg: &VqConfig) -> Self {
        assert_eq!(dim % cfg.product_size, 0, "frame dim not divisible by product_size");
        let dg = dim / cfg.product_size;
        let groups = (0..cfg.product_size)
            .map(|m| VqGroup {
                w_in: b.normal(format!("{name}.g{m}.win"), &[dg, cfg.code_dim], 0.02),
                w_out: b.normal(format!("{name}.g{m}.wout"), &[cfg.code_dim, dg], 0.02),
                codebook: b.zeros(format!("{name}.g{m}.codebook"), &[cfg.codebook_size, cfg.code_dim]),
            })
            .collect();
        Self { dim, cfg: *cfg, groups }
    }

    /// Overwrites every group codebook with Kaiming-scaled noise
    /// (`std = sqrt(2/u)`), each group on an independent seeded stream.
    pub fn init_codebooks(&self, seed: u64, stream_base: u64) {
        let std = (2.0 / self.cfg.code_dim as f64).sqrt();
        for (m, grp) in self.groups.iter().enumerate() {
            let mut rng = derive(seed, stream_base + m as u64);
            let data = normal_vec::<f64>(&mut rng, grp.codebook.len(), 0.0, std);
            grp.codebook.set(data);
        }
    }

    /// Quantizes `[frames, dim]` vectors; see module docs for the scheme.
    pub fn quantize(
        &self,
        frames: &Tensor,
        beta: f64,
        ctx: &Ctx,
        probe: Option<&Probe>,
    ) -> Result<QuantOutput, CodecError> {
        let shape = frames.shape();
        if shape.len() != 2 || shape[1] != self.dim {
            return Err(CodecError::DimMismatch {
                what: "quantizer frame dim",
                expected: self.dim,
                got: *shape.last().unwrap_or(&0),
            });
        }
        let g = shape[0];
        let l = self.cfg.product_size;
        let (dg, u, k) = (self.dim / l, self.cfg.code_dim, self.cfg.codebook_size);

        let mut codes = vec![0u32; g * l];
        let mut loss: Option<Tensor> = None;
        for (m, grp) in self.groups.iter().enumerate() {
            let sub = frames.slice(1, m * dg, (m + 1) * dg);
            let a = sub.matmul(&ctx.param(&grp.w_in)).l2_normalize_last(NORM_EPS);
            let cb_n = ctx.param(&grp.codebook).l2_normalize_last(NORM_EPS);
            let sel = nearest_codes(a.data(), cb_n.data(), g, u, k);
            for (fi, &c) in sel.iter().enumerate() {
                let c = match probe {
                    Some(p) => p.code(c),
                    None => c,
                };
                codes[fi * l + m] = c;
            }
            let rows: Vec<usize> = (0..g).map(|fi| codes[fi * l + m] as usize).collect();
            let b_sel = select_rows(&cb_n, &rows);
            let term = vq_loss_probed(&a, &b_sel, beta, probe);
            loss = Some(match loss {
                Some(acc) => acc.add(&term),
                None => term,
            });
        }
        let z_q_pre = self.lookup_probed(&codes, ctx, probe)?;
        Ok(QuantOutput {
            z_q: ste(frames, &z_q_pre, probe),
            codes,
            vq_loss: loss.expect("at least one group").scale(1.0 / l as f64),
        })
    }

    /// Reconstructs `[frames, dim]` vectors from codes: raw (unnormalized)
    /// codewords pushed through each group's up-projection. The encode
    /// path reuses this, so decoding replays it bit-exactly.
    pub fn lookup(&self, codes: &[u32], ctx: &Ctx) -> Result<Tensor, CodecError> {
        self.lookup_probed(codes, ctx, None)
    }

    fn lookup_probed(
        &self,
        codes: &[u32],
        ctx: &Ctx,
        probe: Option<&Probe>,
    ) -> Result<Tensor, CodecError> {
        let l = self.cfg.product_size;
        if codes.is_empty() || codes.len() % l != 0 {
            return Err(CodecError::DimMismatch {
                what: "codes per frame",
                expected: l,
                got: codes.len(),
            });
        }
        let g = codes.len() / l;
        let k = self.cfg.codebook_size;
        if let Some(&bad) = codes.iter().find(|&&c| c as usize >= k) {
            return Err(CodecError::CodeOutOfRange { code: bad, k });
        }
        let mut parts = Vec::with_capacity(l);
        for (m, grp) in self.groups.iter().enumerate() {
            let rows: Vec<usize> = (0..g).map(|fi| codes[fi * l + m] as usize).collect();
            let cw = select_rows(&sg(&ctx.param(&grp.codebook), probe), &rows);
            parts.push(cw.matmul(&ctx.param(&grp.w_out)));
        }
        let refs: Vec<&Tensor> = parts.iter().collect();
        Ok(Tensor::concat(1, &refs))
    }

    /// Code indices only, without building the reconstruction graph.
    pub fn codes_only(&self, frames: &Tensor, ctx: &Ctx) -> Result<Vec<u32>, CodecError> {
        Ok(self.quantize(frames, 0.0, ctx, None)?.codes)
    }
}

/// Code-usage histograms per (stream, group), for utilization reports.
pub struct CodeStats {
    streams: usize,
    groups: usize,
    k: usize,
    counts: Vec<u64>,
}

impl CodeStats {
    pub fn new(streams: usize, groups: usize, k: usize) -> Self {
        Self { streams, groups, k, counts: vec![0; streams * groups * k] }
    }

    pub fn record(&mut self, stream: usize, group: usize, code: u32) {
        self.counts[(stream * self.groups + group) * self.k + code as usize] += 1;
    }

    /// Records every code of a stream's flat `[frames * groups]` buffer.
    pub fn record_stream(&mut self, stream: usize, codes: &[u32]) {
        for (i, &c) in codes.iter().enumerate() {
            self.record(stream, i % self.groups, c);
        }
    }

    /// Mean normalized code entropy over all groups of all streams that
    /// recorded any codes: 1.0 when every group uses its codebook
    /// uniformly, 0.0 when each collapses to a single code.
    pub fn utilization(&self) -> Result<f64, CodecError> {
        let per_stream = self.groups * self.k;
        let active: Vec<usize> = (0..self.streams)
            .filter(|s| self.counts[s * per_stream..(s + 1) * per_stream].iter().any(|&c| c > 0))
            .collect();
        if active.is_empty() {
            return Err(CodecError::EmptyHistogram);
        }
        let mut entropy = 0.0;
        for &s in &active {
            for grp in 0..self.groups {
                let hist = &self.counts[(s * self.groups + grp) * self.k..][..self.k];
                let total: u64 = hist.iter().sum();
                if total == 0 {
                    continue;
                }
                for &c in hist {
                    if c > 0 {
                        let p = c as f64 / total as f64;
                        entropy -= p * p.log2();
                    }
                }
            }
        }
        let denom = active.len() as f64 * self.groups as f64 * (self.k as f64).log2();
        Ok(entropy / denom)
    }
}
