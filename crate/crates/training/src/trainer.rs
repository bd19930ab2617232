//! Training loop: objective assembly, stream sampling, and the
//! bypass-pretrain schedule.
//!
//! Each step samples how many code streams to keep, runs the codec end to
//! end on a batch of clips, and minimizes a weighted sum of a complex-STFT
//! reconstruction term, a multi-scale log-mel term on the resynthesized
//! waveform, and the quantizer objective. During the pre-training phase the
//! quantizers are bypassed so only the autoencoder backbone trains; at the
//! phase boundary the codebooks are re-initialized and quantized training
//! begins.

use autograd::rng::{derive, SeededRng};
use autograd::{Tape, Tensor};
use codec::layers::Ctx;
use codec::vq::CodeStats;
use codec::{sample_streams, CodecMode, CodecModel, EncodeOptions};
use dsp::{istft, loss_mel_to_targets, mel_targets, ComplexSpectrum, MelScaleSet, StftConfig, Waveform};
use rand::seq::SliceRandom;

use crate::config::TrainConfig;
use crate::error::TrainError;

/// One clip prepared for training: the fixed input spectrum plus the
/// detached mel targets the reconstruction is scored against.
pub struct TrainItem {
    pub wave: Waveform,
    pub spec: Tensor,
    pub stft: StftConfig,
    pub mel_targets: Vec<Tensor>,
}

/// Turns raw clips into training items, trimming each to a whole number of
/// patch columns so the spectrum width divides the patch layout.
pub fn prepare_items(
    waves: &[Vec<f64>],
    stft: &StftConfig,
    scales: &MelScaleSet,
) -> Result<Vec<TrainItem>, TrainError> {
    let chunk = 4 * stft.hop_length;
    let mut items = Vec::with_capacity(waves.len());
    for samples in waves {
        let keep = (samples.len() / chunk) * chunk;
        if keep < stft.win_length {
            return Err(TrainError::InvalidConfig(format!(
                "clip of {} samples is too short for one {}-sample analysis window",
                samples.len(),
                stft.win_length
            )));
        }
        let wave = Waveform::from_samples(samples[..keep].to_vec(), stft.sample_rate);
        let spec = dsp::stft(&wave, stft)?.data;
        let targets = mel_targets(&wave, scales)?;
        items.push(TrainItem { wave, spec, stft: stft.clone(), mel_targets: targets });
    }
    Ok(items)
}

/// Mel scales short enough to score sub-second toy clips.
pub fn toy_mel_scales() -> MelScaleSet {
    let windows = [64usize, 256, 1024];
    let mels = [10usize, 20, 40];
    MelScaleSet {
        scales: windows
            .iter()
            .zip(mels)
            .map(|(&window, n_mels)| dsp::MelScale { window, hop: window / 4, n_mels })
            .collect(),
        log_eps: 1e-5,
    }
}

/// Losses and bookkeeping from one optimizer step.
#[derive(Debug, Clone, Copy)]
pub struct StepStats {
    pub loss: f64,
    pub mel: f64,
    pub stft: f64,
    pub vq: f64,
    pub streams: usize,
    pub grad_norm: f64,
}

/// One history row per step, plus codebook utilization over the current
/// tally window (absent while the quantizers are bypassed).
#[derive(Debug, Clone, Copy)]
pub struct HistoryRow {
    pub step: usize,
    pub active: bool,
    pub streams: usize,
    pub loss: f64,
    pub mel: f64,
    pub stft: f64,
    pub vq: f64,
    pub utilization: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct TrainHistory {
    pub rows: Vec<HistoryRow>,
    /// Step at which the quantizers were switched on, if they ever were.
    pub activation_step: Option<usize>,
}

impl TrainHistory {
    /// Mel loss averaged over the last `window` rows.
    pub fn recent_mel(&self, window: usize) -> f64 {
        let n = window.min(self.rows.len()).max(1);
        let tail = &self.rows[self.rows.len() - n..];
        tail.iter().map(|r| r.mel).sum::<f64>() / tail.len() as f64
    }

    /// Latest utilization reading, if any row has one.
    pub fn last_utilization(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.utilization)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,phase,streams,loss,mel,stft,vq,utilization\n");
        for r in &self.rows {
            let phase = if r.active { "quantized" } else { "bypass" };
            let util = r.utilization.map(|u| format!("{u:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{:.6},{:.6},{}\n",
                r.step, phase, r.streams, r.loss, r.mel, r.stft, r.vq, util
            ));
        }
        out
    }
}

/// Drives optimization of one codec model.
pub struct Trainer<'m> {
    pub model: &'m CodecModel,
    pub opt: crate::optimizer::AdamW,
    cfg: TrainConfig,
    scales: MelScaleSet,
    stream_rng: SeededRng,
    step: usize,
    window: CodeStats,
}

impl<'m> Trainer<'m> {
    pub fn new(model: &'m CodecModel, cfg: TrainConfig, scales: MelScaleSet) -> Result<Self, TrainError> {
        cfg.validate()?;
        scales.validate()?;
        let opt = crate::optimizer::AdamW::new(cfg.lr, cfg.weight_decay);
        let stream_rng = derive(cfg.seed, 0x5741);
        let window = model.code_stats();
        Ok(Self { model, opt, cfg, scales, stream_rng, step: 0, window })
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Codebook utilization over the current tally window.
    pub fn window_utilization(&self) -> Option<f64> {
        self.window.utilization().ok()
    }

    /// Starts a fresh utilization window.
    pub fn reset_window(&mut self) {
        self.window = self.model.code_stats();
    }

    fn check_finite(&self, term: &'static str, value: f64) -> Result<f64, TrainError> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(TrainError::NonFinite { step: self.step, term, value })
        }
    }

    /// Runs one optimizer step over `batch` and returns the losses. The
    /// model is untouched if any loss term is non-finite.
    pub fn train_step(&mut self, batch: &[&TrainItem]) -> Result<StepStats, TrainError> {
        if batch.is_empty() {
            return Err(TrainError::EmptyCorpus);
        }
        let n = self.model.num_layers();
        let streams = if self.model.bypassed() {
            n
        } else {
            sample_streams(n, self.cfg.stream_drop_p, &mut self.stream_rng)
        };
        let mut opts = EncodeOptions::new(streams);
        opts.beta = self.cfg.beta;

        let tape = Tape::new();
        let ctx = Ctx::train(&tape);
        let mut mel_sum: Option<Tensor> = None;
        let mut stft_sum: Option<Tensor> = None;
        let mut vq_sum: Option<Tensor> = None;
        let add = |acc: &mut Option<Tensor>, term: Tensor| {
            *acc = Some(match acc.take() {
                Some(a) => a.add(&term),
                None => term,
            });
        };
        let flat = matches!(self.model.config.mode, CodecMode::Rvq) && !self.model.bypassed();
        for item in batch {
            let out = if flat {
                self.model.rvq_encode(&item.spec, &opts, &ctx, None)?
            } else {
                self.model.encode(&item.spec, &opts, &ctx, None)?
            };
            let recon = out.reconstruction.expect("encode with reconstruct=true");
            let stft_term = item.spec.sub(&recon).square().mean();
            let spec_hat = ComplexSpectrum { data: recon, config: item.stft.clone() };
            let wave_hat = istft(&spec_hat)?;
            let mel_term = loss_mel_to_targets(&item.mel_targets, &wave_hat, &self.scales)?;
            add(&mut mel_sum, mel_term);
            add(&mut stft_sum, stft_term);
            add(&mut vq_sum, out.vq_loss);
            if let Some(payload) = &out.payload {
                self.model.tally(payload, &mut self.window);
            }
        }
        let inv = 1.0 / batch.len() as f64;
        let mel = mel_sum.expect("non-empty batch").scale(inv);
        let stft = stft_sum.expect("non-empty batch").scale(inv);
        let vq = vq_sum.expect("non-empty batch").scale(inv);
        let total =
            stft.scale(self.cfg.lambda_stft).add(&mel.scale(self.cfg.lambda_mel)).add(&vq);

        let stats = StepStats {
            loss: self.check_finite("total", total.item())?,
            mel: self.check_finite("mel", mel.item())?,
            stft: self.check_finite("stft", stft.item())?,
            vq: self.check_finite("vq", vq.item())?,
            streams,
            grad_norm: 0.0,
        };
        let grads = tape.backward(&total)?;
        let norm = self.opt.step(&self.model.registry.params, &grads, Some(self.cfg.grad_clip));
        self.step += 1;
        Ok(StepStats { grad_norm: norm, ..stats })
    }
}

/// Runs the full schedule: `pretrain_steps` with the quantizers bypassed,
/// then quantized training to `total_steps`, shuffling the corpus each epoch.
pub fn run_schedule(
    model: &CodecModel,
    items: &[TrainItem],
    cfg: &TrainConfig,
    scales: &MelScaleSet,
) -> Result<TrainHistory, TrainError> {
    cfg.validate()?;
    if items.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    let mut trainer = Trainer::new(model, cfg.clone(), scales.clone())?;
    model.set_bypass(cfg.pretrain_steps > 0);
    let mut history = TrainHistory::default();
    if cfg.pretrain_steps == 0 {
        history.activation_step = Some(0);
    }

    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut epoch = 0u64;
    let mut cursor = order.len();
    for step in 0..cfg.total_steps {
        if step == cfg.pretrain_steps && cfg.pretrain_steps > 0 {
            model.set_bypass(false);
            trainer.reset_window();
            history.activation_step = Some(step);
        }
        if step > 0 && step % cfg.util_window == 0 {
            trainer.reset_window();
        }
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.batch_size {
            if cursor >= order.len() {
                order.shuffle(&mut derive(cfg.seed, 0xE0 + epoch));
                epoch += 1;
                cursor = 0;
            }
            batch.push(&items[order[cursor]]);
            cursor += 1;
        }
        let stats = trainer.train_step(&batch)?;
        history.rows.push(HistoryRow {
            step,
            active: !model.bypassed(),
            streams: stats.streams,
            loss: stats.loss,
            mel: stats.mel,
            stft: stats.stft,
            vq: stats.vq,
            utilization: if model.bypassed() { None } else { trainer.window_utilization() },
        });
    }
    Ok(history)
}
