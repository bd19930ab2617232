//! The codec model: patch embedding, window-attention encoder/decoder,
//! and cross-scale residual quantization. One quantizer stage runs per
//! transmitted stream; each residual stage after the bottleneck taps the
//! decoder one scale further up, so truncating streams only truncates the
//! refinement, never the base reconstruction.

use crate::config::{CodecConfig, CodecMode};
use crate::encdec::{build_decoder, build_encoder, encoder_forward, DecoderLayer, EncoderLayer, FeatureMap};
use crate::error::CodecError;
use crate::layers::{Builder, Ctx, Linear, Registry};
use crate::patch::{depatchify, patch_len, patchify};
use crate::vq::{CodeStats, Probe, ProductVq, QuantOutput};
use autograd::Tensor;
use std::cell::Cell;

/// Everything a decoder needs besides the weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedPayload {
    pub num_streams: u8,
    /// Merged two-frame groups per stream.
    pub frame_groups: u32,
    /// Per stream: one code per (group, product index), product fastest.
    pub codes: Vec<Vec<u32>>,
    /// Hash of the model config that produced the codes.
    pub fingerprint: u64,
    pub sample_rate: u32,
    pub product_size: u8,
    pub codebook_bits: u8,
}

impl EncodedPayload {
    /// Payload size excluding headers and padding.
    pub fn total_bits(&self) -> usize {
        self.num_streams as usize
            * self.frame_groups as usize
            * self.product_size as usize
            * self.codebook_bits as usize
    }
}

pub struct EncodeOptions {
    pub streams: usize,
    /// Commitment weight inside the quantizer objective.
    pub beta: f64,
    /// Skip the remaining decoder layers when only codes are needed.
    pub reconstruct: bool,
}

impl EncodeOptions {
    pub fn new(streams: usize) -> Self {
        Self { streams, beta: 0.25, reconstruct: true }
    }

    pub fn codes_only(streams: usize) -> Self {
        Self { streams, beta: 0.25, reconstruct: false }
    }
}

pub struct EncodeResult {
    /// Absent when the quantizers are bypassed.
    pub payload: Option<EncodedPayload>,
    /// `[2, F, T]` spectrum, present unless `reconstruct` was off.
    pub reconstruction: Option<Tensor>,
    /// Sum of per-stream quantizer losses; exactly zero when bypassed.
    pub vq_loss: Tensor,
}

/// Flattens `[C, H, W]` into `[W/2, 2*C*H]` merged two-frame vectors.
pub fn merge_frames(z: &Tensor) -> Result<Tensor, CodecError> {
    let s = z.shape();
    let (c, h, w) = (s[0], s[1], s[2]);
    if w % 2 != 0 {
        return Err(CodecError::OddWidth { w });
    }
    Ok(z.permute(&[2, 0, 1]).reshape(&[w / 2, 2 * c * h]))
}

/// Inverse of `merge_frames`.
pub fn unmerge_frames(frames: &Tensor, c: usize, h: usize) -> Tensor {
    let g = frames.shape()[0];
    frames.reshape(&[2 * g, c, h]).permute(&[1, 2, 0])
}

/// Training-time stream sampler: with probability `p` draw s uniformly
/// from `1..=n`, otherwise use all `n` streams.
pub fn sample_streams(n: usize, p: f64, rng: &mut impl rand::Rng) -> usize {
    if rng.gen::<f64>() < p {
        rng.gen_range(1..=n)
    } else {
        n
    }
}

pub struct CodecModel {
    pub config: CodecConfig,
    pub embed: Linear,
    pub deembed: Linear,
    pub encoder: Vec<EncoderLayer>,
    pub decoder: Vec<DecoderLayer>,
    pub quantizers: Vec<ProductVq>,
    pub registry: Registry,
    pub seed: u64,
    vq_active: Cell<bool>,
    codebooks_fresh: Cell<bool>,
}

const CODEBOOK_SEED_SALT: u64 = 0x9e3779b97f4a7c15;

impl CodecModel {
    pub fn new(config: CodecConfig, seed: u64) -> Result<Self, CodecError> {
        config.validate()?;
        let mut b = Builder::new(seed);
        let plen = patch_len(config.arch.patch_freq, config.arch.patch_time);
        let c0 = config.dim_at_scale(0);
        let embed = b.linear("patch.embed", plen, c0, true);
        let deembed = b.linear("patch.deembed", c0, plen, true);
        let encoder = build_encoder(&mut b, &config);
        let decoder = build_decoder(&mut b, &config);
        let quantizers = config
            .quantizer_dims()
            .into_iter()
            .enumerate()
            .map(|(i, d)| ProductVq::new(&mut b, &format!("q{i}"), d, &config.vq))
            .collect();
        let model = Self {
            config,
            embed,
            deembed,
            encoder,
            decoder,
            quantizers,
            registry: Registry::new(b.params),
            seed,
            vq_active: Cell::new(true),
            codebooks_fresh: Cell::new(true),
        };
        model.init_codebooks();
        Ok(model)
    }

    /// Kaiming re-draw of every codebook, deterministic in the model seed.
    pub fn init_codebooks(&self) {
        for (qi, q) in self.quantizers.iter().enumerate() {
            q.init_codebooks(self.seed ^ CODEBOOK_SEED_SALT, (qi * 256) as u64);
        }
    }

    /// Toggles the pre-training bypass. Entering bypass marks the
    /// codebooks stale; leaving it re-initializes them exactly once, no
    /// matter how many times this is called.
    pub fn set_bypass(&self, bypass: bool) {
        if bypass {
            if self.vq_active.get() {
                self.vq_active.set(false);
                self.codebooks_fresh.set(false);
            }
        } else if !self.vq_active.get() {
            self.vq_active.set(true);
            if !self.codebooks_fresh.get() {
                self.init_codebooks();
                self.codebooks_fresh.set(true);
            }
        }
    }

    pub fn bypassed(&self) -> bool {
        !self.vq_active.get()
    }

    /// Restores persisted bypass state: a bypassed model's codebooks are
    /// stale (so later activation re-seeds them), an active model's are
    /// kept as loaded.
    pub(crate) fn set_bypass_raw(&self, bypass: bool) {
        self.vq_active.set(!bypass);
        self.codebooks_fresh.set(!bypass);
    }

    pub fn num_layers(&self) -> usize {
        self.encoder.len()
    }

    fn check_streams(&self, s: usize) -> Result<(), CodecError> {
        let max = self.num_layers();
        if s < 1 || s > max {
            return Err(CodecError::StreamCount { s, max });
        }
        Ok(())
    }

    /// Patch-embeds a `[2, F, T]` spectrum into the scale-0 feature map.
    pub fn embed_spectrum(&self, spec: &Tensor, ctx: &Ctx) -> Result<FeatureMap, CodecError> {
        let a = &self.config.arch;
        let data = patchify(spec, &self.embed, a.patch_freq, a.patch_time, ctx)?;
        Ok(FeatureMap { data, scale: 0 })
    }

    fn feature_dims(&self, scale: usize) -> (usize, usize) {
        (self.config.dim_at_scale(scale), self.config.height_at_scale(scale))
    }

    fn finish_payload(&self, codes: Vec<Vec<u32>>, groups: usize) -> EncodedPayload {
        EncodedPayload {
            num_streams: codes.len() as u8,
            frame_groups: groups as u32,
            codes,
            fingerprint: self.config.fingerprint(),
            sample_rate: self.config.stft.sample_rate,
            product_size: self.config.vq.product_size as u8,
            codebook_bits: self.config.code_bits(),
        }
    }

    /// Encodes a `[2, F, T]` spectrum into `opts.streams` code streams,
    /// following the cross-scale schedule. In bypass mode the quantizers
    /// are skipped entirely and only the plain autoencoder reconstruction
    /// is produced.
    pub fn encode(
        &self,
        spec: &Tensor,
        opts: &EncodeOptions,
        ctx: &Ctx,
        probe: Option<&Probe>,
    ) -> Result<EncodeResult, CodecError> {
        self.check_streams(opts.streams)?;
        let n = self.num_layers();
        let s = opts.streams;
        let z0 = self.embed_spectrum(spec, ctx)?;
        let z_e = encoder_forward(&self.encoder, &z0, ctx)?;

        if !self.vq_active.get() {
            let mut zq = FeatureMap { data: z_e[n - 1].data.clone(), scale: n };
            for layer in &self.decoder {
                zq = layer.forward(&zq, ctx)?;
            }
            let recon = depatchify(
                &zq.data,
                &self.deembed,
                self.config.arch.patch_freq,
                self.config.arch.patch_time,
                ctx,
            )?;
            return Ok(EncodeResult {
                payload: None,
                reconstruction: Some(recon),
                vq_loss: Tensor::scalar(0.0),
            });
        }

        if self.config.mode == CodecMode::Rvq && s > 1 {
            return Err(CodecError::WrongMode("cross-scale encode on an rvq-mode model"));
        }

        let bottom = merge_frames(&z_e[n - 1].data)?;
        let groups = bottom.shape()[0];
        let q0 = self.quantizers[0].quantize(&bottom, opts.beta, ctx, probe)?;
        let mut vq_sum = q0.vq_loss;
        let mut codes = vec![q0.codes];
        let (c_n, h_n) = self.feature_dims(n);
        let mut zq = FeatureMap { data: unmerge_frames(&q0.z_q, c_n, h_n), scale: n };

        for i in 1..s {
            let target = &z_e[n - i]; // scale n-i+1, same as zq here
            let resid = merge_frames(&target.data)?.sub(&merge_frames(&zq.data)?);
            let qi = self.quantizers[i].quantize(&resid, opts.beta, ctx, probe)?;
            vq_sum = vq_sum.add(&qi.vq_loss);
            codes.push(qi.codes);
            let (c, h) = self.feature_dims(zq.scale);
            zq = FeatureMap { data: zq.data.add(&unmerge_frames(&qi.z_q, c, h)), scale: zq.scale };
            if i + 1 < s {
                zq = self.decoder[i - 1].forward(&zq, ctx)?;
            }
        }

        let payload = Some(self.finish_payload(codes, groups));
        if !opts.reconstruct {
            return Ok(EncodeResult { payload, reconstruction: None, vq_loss: vq_sum });
        }
        for li in s.saturating_sub(2)..n {
            zq = self.decoder[li].forward(&zq, ctx)?;
        }
        let recon = depatchify(
            &zq.data,
            &self.deembed,
            self.config.arch.patch_freq,
            self.config.arch.patch_time,
            ctx,
        )?;
        Ok(EncodeResult { payload, reconstruction: Some(recon), vq_loss: vq_sum })
    }

    /// Reconstructs a `[2, F, T]` spectrum from a payload, strict about
    /// the config fingerprint unless told otherwise.
    pub fn decode(&self, payload: &EncodedPayload, ctx: &Ctx) -> Result<Tensor, CodecError> {
        self.decode_with(payload, ctx, true)
    }

    pub fn decode_with(
        &self,
        payload: &EncodedPayload,
        ctx: &Ctx,
        check_fingerprint: bool,
    ) -> Result<Tensor, CodecError> {
        if self.bypassed() {
            return Err(CodecError::Bypassed);
        }
        let expected = self.config.fingerprint();
        if check_fingerprint && payload.fingerprint != expected {
            return Err(CodecError::Fingerprint { expected, got: payload.fingerprint });
        }
        if self.config.mode == CodecMode::Rvq {
            return self.rvq_decode(payload, ctx);
        }
        let n = self.num_layers();
        let s = payload.num_streams as usize;
        self.check_streams(s)?;
        if payload.codes.len() != s {
            return Err(CodecError::DimMismatch {
                what: "code streams",
                expected: s,
                got: payload.codes.len(),
            });
        }

        let (c_n, h_n) = self.feature_dims(n);
        let base = self.quantizers[0].lookup(&payload.codes[0], ctx)?;
        let mut zq = FeatureMap { data: unmerge_frames(&base, c_n, h_n), scale: n };
        for li in 0..n {
            let stream = li + 1;
            if stream < s {
                let (c, h) = self.feature_dims(zq.scale);
                let q = self.quantizers[stream].lookup(&payload.codes[stream], ctx)?;
                zq = FeatureMap { data: zq.data.add(&unmerge_frames(&q, c, h)), scale: zq.scale };
            }
            zq = self.decoder[li].forward(&zq, ctx)?;
        }
        depatchify(
            &zq.data,
            &self.deembed,
            self.config.arch.patch_freq,
            self.config.arch.patch_time,
            ctx,
        )
    }

    /// Plain residual-VQ baseline: every stage quantizes the remaining
    /// bottleneck residual, and the stage outputs sum before decoding.
    pub fn rvq_encode(
        &self,
        spec: &Tensor,
        opts: &EncodeOptions,
        ctx: &Ctx,
        probe: Option<&Probe>,
    ) -> Result<EncodeResult, CodecError> {
        self.check_streams(opts.streams)?;
        if self.bypassed() {
            return Err(CodecError::Bypassed);
        }
        let n = self.num_layers();
        let s = opts.streams;
        let bottleneck_dim = self.config.quantizer_dims()[0];
        for q in self.quantizers.iter().take(s) {
            if q.dim != bottleneck_dim {
                return Err(CodecError::DimMismatch {
                    what: "rvq stage dim at the bottleneck",
                    expected: bottleneck_dim,
                    got: q.dim,
                });
            }
        }
        let z0 = self.embed_spectrum(spec, ctx)?;
        let z_e = encoder_forward(&self.encoder, &z0, ctx)?;
        let bottom = merge_frames(&z_e[n - 1].data)?;
        let groups = bottom.shape()[0];

        let mut resid = bottom;
        let mut acc: Option<Tensor> = None;
        let mut vq_sum: Option<Tensor> = None;
        let mut codes = Vec::with_capacity(s);
        for i in 0..s {
            let QuantOutput { z_q, codes: c, vq_loss } =
                self.quantizers[i].quantize(&resid, opts.beta, ctx, probe)?;
            resid = resid.sub(&z_q);
            acc = Some(match acc {
                Some(a) => a.add(&z_q),
                None => z_q,
            });
            vq_sum = Some(match vq_sum {
                Some(v) => v.add(&vq_loss),
                None => vq_loss,
            });
            codes.push(c);
        }

        let payload = Some(self.finish_payload(codes, groups));
        let vq_sum = vq_sum.expect("s >= 1");
        if !opts.reconstruct {
            return Ok(EncodeResult { payload, reconstruction: None, vq_loss: vq_sum });
        }
        let (c_n, h_n) = self.feature_dims(n);
        let mut zq = FeatureMap { data: unmerge_frames(&acc.expect("s >= 1"), c_n, h_n), scale: n };
        for layer in &self.decoder {
            zq = layer.forward(&zq, ctx)?;
        }
        let recon = depatchify(
            &zq.data,
            &self.deembed,
            self.config.arch.patch_freq,
            self.config.arch.patch_time,
            ctx,
        )?;
        Ok(EncodeResult { payload, reconstruction: Some(recon), vq_loss: vq_sum })
    }

    pub fn rvq_decode(&self, payload: &EncodedPayload, ctx: &Ctx) -> Result<Tensor, CodecError> {
        if self.bypassed() {
            return Err(CodecError::Bypassed);
        }
        let n = self.num_layers();
        let s = payload.num_streams as usize;
        self.check_streams(s)?;
        let mut acc: Option<Tensor> = None;
        for i in 0..s {
            let q = self.quantizers[i].lookup(&payload.codes[i], ctx)?;
            acc = Some(match acc {
                Some(a) => a.add(&q),
                None => q,
            });
        }
        let (c_n, h_n) = self.feature_dims(n);
        let mut zq = FeatureMap { data: unmerge_frames(&acc.expect("s >= 1"), c_n, h_n), scale: n };
        for layer in &self.decoder {
            zq = layer.forward(&zq, ctx)?;
        }
        depatchify(
            &zq.data,
            &self.deembed,
            self.config.arch.patch_freq,
            self.config.arch.patch_time,
            ctx,
        )
    }

    /// Records one payload's codes into usage histograms.
    pub fn tally(&self, payload: &EncodedPayload, stats: &mut CodeStats) {
        for (stream, codes) in payload.codes.iter().enumerate() {
            stats.record_stream(stream, codes);
        }
    }

    /// Fresh histogram set sized for this model.
    pub fn code_stats(&self) -> CodeStats {
        CodeStats::new(self.num_layers(), self.config.vq.product_size, self.config.vq.codebook_size)
    }

    /// Parameter totals by module, in report order.
    pub fn param_breakdown(&self) -> Vec<(String, usize)> {
        let mut rows = vec![
            ("patch".to_string(), self.registry.len_under("patch")),
            ("encoder".to_string(), self.registry.len_under("enc")),
            ("decoder".to_string(), self.registry.len_under("dec")),
        ];
        for i in 0..self.quantizers.len() {
            rows.push((format!("quantizer{i}"), self.registry.len_under(&format!("q{i}"))));
        }
        rows
    }
}
