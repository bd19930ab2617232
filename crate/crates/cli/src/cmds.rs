//! Command implementations: train, encode, decode, eval, inspect.

use std::path::{Path, PathBuf};
use std::time::Instant;

use codec::bitstream::{bitrate_kbps, pack, unpack};
use codec::{checkpoint, CodecModel, Ctx, EncodeOptions, EncodedPayload};
use dsp::{istft, mel_distance, read_wav, si_sdr, write_wav, ComplexSpectrum, MelScaleSet, Waveform};
use training::{prepare_items, run_schedule, toy_mel_scales};

use crate::cfgfile::FileConfig;
use crate::error::CliError;

/// Mel scales that fit the shortest clip: the full standard set for
/// clips of 4096+ samples, the short-window set below that.
fn scales_for(min_len: usize) -> MelScaleSet {
    if min_len >= 4096 {
        MelScaleSet::default()
    } else {
        toy_mel_scales()
    }
}

/// Trims to a whole number of merged patch columns (4 hops of samples).
fn trim_len(samples: usize, hop: usize) -> usize {
    (samples / (4 * hop)) * (4 * hop)
}

fn load_model(path: &Path) -> Result<CodecModel, CliError> {
    checkpoint::load(path).map_err(CliError::from)
}

fn wav_corpus(dir: &Path, sample_rate: u32) -> Result<Vec<Vec<f64>>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::usage(format!("no .wav files in {}", dir.display())));
    }
    let mut out = Vec::with_capacity(paths.len());
    for p in &paths {
        let (samples, sr) = read_wav(p)?;
        if sr != sample_rate {
            return Err(CliError::usage(format!(
                "{}: sample rate {sr}, model expects {sample_rate}",
                p.display()
            )));
        }
        out.push(samples);
    }
    Ok(out)
}

pub struct TrainArgs<'a> {
    pub config: Option<&'a Path>,
    pub data_dir: Option<&'a Path>,
    pub synth: Option<usize>,
    pub clip_seconds: f64,
    pub out: &'a Path,
    pub seed: Option<u64>,
}

pub fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut fc = match args.config {
        Some(p) => crate::cfgfile::parse(&std::fs::read_to_string(p)?)?,
        None => FileConfig::default(),
    };
    if let Some(seed) = args.seed {
        fc.train.seed = seed;
    }
    let sr = fc.codec.stft.sample_rate;
    let waves = match (args.data_dir, args.synth) {
        (Some(dir), None) => wav_corpus(dir, sr)?,
        (None, Some(n)) => {
            if n == 0 {
                return Err(CliError::usage("--synth needs at least one clip"));
            }
            let samples = (args.clip_seconds * sr as f64).round() as usize;
            training::synth_corpus(n, samples, sr, fc.train.seed)
        }
        _ => return Err(CliError::usage("pass exactly one of --data-dir or --synth N")),
    };
    let min_len = waves.iter().map(Vec::len).min().unwrap_or(0);
    let scales = scales_for(min_len);
    let items = prepare_items(&waves, &fc.codec.stft, &scales)?;

    let model = CodecModel::new(fc.codec.clone(), fc.train.seed)
        .map_err(|e| CliError::usage(format!("invalid model config: {e}")))?;
    let history = run_schedule(&model, &items, &fc.train, &scales)?;
    checkpoint::save(&model, args.out)?;
    let csv_path = args.out.with_extension("history.csv");
    std::fs::write(&csv_path, history.to_csv())?;

    let first = history.rows.first().map(|r| r.loss).unwrap_or(f64::NAN);
    let last = history.recent_mel(10);
    let avg_loss: f64 =
        history.rows.iter().rev().take(10).map(|r| r.loss).sum::<f64>() / 10f64.min(history.rows.len() as f64);
    println!("trained {} steps on {} clips", history.rows.len(), items.len());
    match history.activation_step {
        Some(s) => println!("quantizers active from step {s}"),
        None => println!("quantizers never activated (pure autoencoder schedule)"),
    }
    println!("loss: first {first:.4}, last-10 avg {avg_loss:.4}; mel last-10 avg {last:.4}");
    if let Some(u) = history.last_utilization() {
        println!("codebook utilization (last window): {u:.3}");
    }
    println!("checkpoint: {}", args.out.display());
    println!("history: {}", csv_path.display());
    Ok(())
}

pub fn cmd_encode(
    model_path: &Path,
    input: &Path,
    output: &Path,
    streams: usize,
) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let cfg = &model.config.stft;
    let (samples, sr) = read_wav(input)?;
    if sr != cfg.sample_rate {
        return Err(CliError::usage(format!(
            "{}: sample rate {sr}, model expects {}",
            input.display(),
            cfg.sample_rate
        )));
    }
    let keep = trim_len(samples.len(), cfg.hop_length);
    if keep == 0 {
        return Err(CliError::usage(format!(
            "clip too short: need at least {} samples",
            4 * cfg.hop_length
        )));
    }
    if keep < samples.len() {
        println!("note: trimmed {} -> {keep} samples (whole patch columns)", samples.len());
    }
    let wave = Waveform::from_samples(samples[..keep].to_vec(), sr);

    let t0 = Instant::now();
    let spec = dsp::stft(&wave, cfg)?;
    let out = model.encode(&spec.data, &EncodeOptions::codes_only(streams), &Ctx::infer(), None)?;
    let payload = out.payload.ok_or_else(|| {
        CliError::usage("checkpoint is a pre-training snapshot; quantizers are inactive")
    })?;
    let bytes = pack(&payload).map_err(|e| CliError::data(e.to_string()))?;
    let elapsed = t0.elapsed().as_secs_f64();

    std::fs::write(output, &bytes)?;
    let duration = keep as f64 / sr as f64;
    println!(
        "{}: {} bytes, {:.2} kbps, encode RTF {:.1}",
        output.display(),
        bytes.len(),
        bitrate_kbps(&payload, duration),
        duration / elapsed
    );
    Ok(())
}

pub fn cmd_decode(
    model_path: &Path,
    input: &Path,
    output: &Path,
    lenient: bool,
) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let bytes = std::fs::read(input)?;
    let payload = unpack(&bytes, lenient)?;

    let t0 = Instant::now();
    let spec = model.decode_with(&payload, !lenient)?;
    let wave = istft(&ComplexSpectrum { data: spec, config: model.config.stft.clone() })?;
    let elapsed = t0.elapsed().as_secs_f64();

    write_wav(output, wave.samples.data(), wave.sample_rate)?;
    let duration = wave.len() as f64 / wave.sample_rate as f64;
    println!(
        "{}: {:.2} s from {} streams, decode RTF {:.1}",
        output.display(),
        duration,
        payload.num_streams,
        duration / elapsed
    );
    Ok(())
}

struct EvalRow {
    streams: usize,
    mel: f64,
    si_sdr: f64,
    kbps: f64,
    utilization: f64,
    rtf_enc: f64,
    rtf_dec: f64,
}

pub fn cmd_eval(
    model_path: &Path,
    data_dir: &Path,
    streams: Option<Vec<usize>>,
    csv_out: Option<&Path>,
) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let cfg = &model.config.stft;
    let waves = wav_corpus(data_dir, cfg.sample_rate)?;
    let n = model.num_layers();
    let list = streams.unwrap_or_else(|| (1..=n).collect());
    for &s in &list {
        if s == 0 || s > n {
            return Err(CliError::usage(format!("stream count {s} outside 1..={n}")));
        }
    }
    let clips: Vec<Waveform> = waves
        .iter()
        .map(|w| {
            let keep = trim_len(w.len(), cfg.hop_length);
            Waveform::from_samples(w[..keep].to_vec(), cfg.sample_rate)
        })
        .filter(|w| w.len() > 0)
        .collect();
    if clips.is_empty() {
        return Err(CliError::usage("no usable clips (all too short)"));
    }
    let min_len = clips.iter().map(|c| c.len()).min().unwrap();
    let scales = scales_for(min_len);
    let ctx = Ctx::infer();

    let mut rows = Vec::with_capacity(list.len());
    for &s in &list {
        let mut stats = model.code_stats();
        let (mut mel_sum, mut sdr_sum) = (0.0, 0.0);
        let (mut t_enc, mut t_dec, mut dur, mut bits) = (0.0, 0.0, 0.0, 0usize);
        for clip in &clips {
            let t0 = Instant::now();
            let spec = dsp::stft(clip, cfg)?;
            let out = model.encode(&spec.data, &EncodeOptions::codes_only(s), &ctx, None)?;
            t_enc += t0.elapsed().as_secs_f64();
            let payload: EncodedPayload = out
                .payload
                .ok_or_else(|| CliError::usage("checkpoint has inactive quantizers"))?;
            model.tally(&payload, &mut stats);
            bits += payload.total_bits();

            let t1 = Instant::now();
            let dec = model.decode_with(&payload, true)?;
            let wave_hat = istft(&ComplexSpectrum { data: dec, config: cfg.clone() })?;
            t_dec += t1.elapsed().as_secs_f64();

            let m = clip.len().min(wave_hat.len());
            mel_sum += mel_distance(clip, &wave_hat, &scales)?;
            sdr_sum += si_sdr(&clip.samples.data()[..m], &wave_hat.samples.data()[..m])?;
            dur += clip.len() as f64 / cfg.sample_rate as f64;
        }
        let k = clips.len() as f64;
        rows.push(EvalRow {
            streams: s,
            mel: mel_sum / k,
            si_sdr: sdr_sum / k,
            kbps: bits as f64 / dur / 1000.0,
            utilization: model_util(&stats),
            rtf_enc: dur / t_enc,
            rtf_dec: dur / t_dec,
        });
    }

    println!(
        "{:>7}  {:>8}  {:>8}  {:>7}  {:>11}  {:>8}  {:>8}",
        "streams", "mel", "si-sdr", "kbps", "utilization", "enc-rtf", "dec-rtf"
    );
    for r in &rows {
        println!(
            "{:>7}  {:>8.4}  {:>8.2}  {:>7.2}  {:>11.3}  {:>8.1}  {:>8.1}",
            r.streams, r.mel, r.si_sdr, r.kbps, r.utilization, r.rtf_enc, r.rtf_dec
        );
    }
    if let Some(path) = csv_out {
        let mut csv = String::from("streams,mel,si_sdr,kbps,utilization,enc_rtf,dec_rtf\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{:.6},{:.4},{:.4},{:.6},{:.2},{:.2}\n",
                r.streams, r.mel, r.si_sdr, r.kbps, r.utilization, r.rtf_enc, r.rtf_dec
            ));
        }
        std::fs::write(path, csv)?;
        println!("csv: {}", path.display());
    }
    Ok(())
}

fn model_util(stats: &codec::CodeStats) -> f64 {
    stats.utilization().unwrap_or(f64::NAN)
}

pub fn cmd_inspect(model_path: &Path) -> Result<(), CliError> {
    let model = load_model(model_path)?;
    let cfg = &model.config;
    println!("mode: {:?}", cfg.mode);
    println!("sample rate: {} Hz", cfg.stft.sample_rate);
    println!(
        "stft: win {} / hop {} / n_fft {} ({} bins)",
        cfg.stft.win_length,
        cfg.stft.hop_length,
        cfg.stft.n_fft,
        cfg.stft.num_bins()
    );
    println!("scales: {:?} channels, heads {:?}", cfg.arch.layer_dims, cfg.arch.attention_heads);

    println!("parameters:");
    let mut total = 0usize;
    for (name, count) in model.param_breakdown() {
        println!("  {name:<12} {count:>10}");
        total += count;
    }
    println!("  {:<12} {total:>10}", "total");
    let reference = 8_390_000.0;
    let delta = (total as f64 - reference) / reference * 100.0;
    println!("vs 8.39M reference: {delta:+.1}% ({})", if delta.abs() <= 15.0 { "within ±15%" } else { "outside ±15%" });

    println!("quantizer dims per stream: {:?}", cfg.quantizer_dims());
    println!(
        "codes: {} streams x {} groups x {} bits",
        cfg.arch.layer_dims.len(),
        cfg.vq.product_size,
        cfg.code_bits()
    );
    println!("fingerprint: {:016x}", cfg.fingerprint());
    Ok(())
}
