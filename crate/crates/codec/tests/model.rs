//! End-to-end model contracts on the toy configuration: shape chain,
//! payload layout, bit-exact decode replay, the single-stream equivalence
//! of the cross-scale and plain-residual paths, and bypass semantics.

use autograd::Tensor;
use codec::{
    merge_frames, sample_streams, unmerge_frames, CodecConfig, CodecError, CodecMode, CodecModel,
    Ctx, EncodeOptions,
};

fn toy_model(seed: u64) -> CodecModel {
    CodecModel::new(CodecConfig::toy(), seed).unwrap()
}

/// Deterministic pseudo-speech spectrum in `[2, 24, t]`.
fn toy_spec(t: usize, salt: u64) -> Tensor {
    let n = 2 * 24 * t;
    let data: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 + salt as f64 * 0.618) * 0.7331;
            (x.sin() + (x * 0.137).cos()) * 0.3
        })
        .collect();
    Tensor::constant(data, &[2, 24, t])
}

#[test]
fn merge_orders_frames_channel_major_and_pairs_adjacent() {
    // z[c,h,w] = c*8 + h*4 + w over [2,2,4].
    let z = Tensor::constant((0..16).map(|v| v as f64).collect(), &[2, 2, 4]);
    let m = merge_frames(&z).unwrap();
    assert_eq!(m.shape(), &[2, 8]);
    // Group 0 = frame 0 then frame 1; each frame lists (c,h) with c outer.
    assert_eq!(m.data(), &[0., 4., 8., 12., 1., 5., 9., 13., 2., 6., 10., 14., 3., 7., 11., 15.]);
}

#[test]
fn unmerge_inverts_merge_bit_exactly() {
    for (c, h, w) in [(2, 2, 4), (8, 1, 10), (3, 5, 6)] {
        let data: Vec<f64> = (0..c * h * w).map(|i| (i as f64 * 0.917).sin()).collect();
        let z = Tensor::constant(data.clone(), &[c, h, w]);
        let back = unmerge_frames(&merge_frames(&z).unwrap(), c, h);
        assert_eq!(back.shape(), &[c, h, w]);
        assert_eq!(back.data(), data.as_slice());
    }
}

#[test]
fn merge_rejects_odd_width() {
    let z = Tensor::constant(vec![0.0; 2 * 2 * 3], &[2, 2, 3]);
    assert!(matches!(merge_frames(&z), Err(CodecError::OddWidth { w: 3 })));
}

#[test]
fn toy_parameter_count_matches_hand_derivation() {
    let model = toy_model(0);
    assert_eq!(model.registry.total_len(), 55_400);
    let by_module: std::collections::HashMap<String, usize> =
        model.param_breakdown().into_iter().collect();
    assert_eq!(by_module["patch"], 212);
    assert_eq!(by_module["encoder"], 25_670);
    assert_eq!(by_module["decoder"], 25_678);
    assert_eq!(by_module["quantizer0"] + by_module["quantizer1"] + by_module["quantizer2"], 3_840);
}

#[test]
fn encoder_scale_chain_and_payload_layout() {
    let model = toy_model(1);
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 0); // T=20 -> W=10 -> 5 merged groups
    let fm = model.embed_spectrum(&spec, &ctx).unwrap();
    assert_eq!(fm.data.shape(), &[8, 8, 10]);
    let z_e = codec::encoder_forward(&model.encoder, &fm, &ctx).unwrap();
    let shapes: Vec<_> = z_e.iter().map(|f| f.data.shape().to_vec()).collect();
    assert_eq!(shapes, vec![vec![8, 4, 10], vec![16, 2, 10], vec![32, 1, 10]]);

    for s in 1..=3usize {
        let out = model.encode(&spec, &EncodeOptions::new(s), &ctx, None).unwrap();
        let payload = out.payload.expect("quantizers active");
        assert_eq!(payload.num_streams, s as u8);
        assert_eq!(payload.frame_groups, 5);
        assert_eq!(payload.codes.len(), s);
        for stream in &payload.codes {
            assert_eq!(stream.len(), 5 * 2); // groups * product_size
            assert!(stream.iter().all(|&c| c < 16));
        }
        assert_eq!(payload.product_size, 2);
        assert_eq!(payload.codebook_bits, 4);
        assert_eq!(payload.sample_rate, 16000);
        assert_eq!(payload.fingerprint, model.config.fingerprint());
        assert_eq!(payload.total_bits(), s * 5 * 2 * 4);
        let recon = out.reconstruction.expect("reconstruct on");
        assert_eq!(recon.shape(), &[2, 24, 20]);
    }
}

#[test]
fn decode_replays_encoder_reconstruction_bit_exactly() {
    let model = toy_model(2);
    let ctx = Ctx::infer();
    for s in 1..=3usize {
        for salt in 0..4u64 {
            let spec = toy_spec(20, salt);
            let out = model.encode(&spec, &EncodeOptions::new(s), &ctx, None).unwrap();
            let recon = out.reconstruction.unwrap();
            let decoded = model.decode(&out.payload.unwrap(), &ctx).unwrap();
            assert_eq!(decoded.shape(), recon.shape());
            assert_eq!(decoded.data(), recon.data(), "s={s} salt={salt}");
        }
    }
}

#[test]
fn codes_only_payload_matches_full_encode() {
    let model = toy_model(2);
    let ctx = Ctx::infer();
    let spec = toy_spec(40, 7);
    let full = model.encode(&spec, &EncodeOptions::new(3), &ctx, None).unwrap();
    let fast = model.encode(&spec, &EncodeOptions::codes_only(3), &ctx, None).unwrap();
    assert!(fast.reconstruction.is_none());
    assert_eq!(fast.payload.unwrap().codes, full.payload.unwrap().codes);
}

#[test]
fn single_stream_cross_scale_equals_plain_residual_path() {
    let mut cfg = CodecConfig::toy();
    cfg.mode = CodecMode::Rvq;
    let model = CodecModel::new(cfg, 3).unwrap();
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 9);
    let cs = model.encode(&spec, &EncodeOptions::new(1), &ctx, None).unwrap();
    let rvq = model.rvq_encode(&spec, &EncodeOptions::new(1), &ctx, None).unwrap();
    let (pc, pr) = (cs.payload.unwrap(), rvq.payload.unwrap());
    assert_eq!(pc.codes, pr.codes);
    assert_eq!(pc.fingerprint, pr.fingerprint);
    let (rc, rr) = (cs.reconstruction.unwrap(), rvq.reconstruction.unwrap());
    assert_eq!(rc.data(), rr.data());
    // And the decoders agree with each other on the shared payload.
    let via_rvq = model.rvq_decode(&pc, &ctx).unwrap();
    let via_cs = model.decode(&pr, &ctx).unwrap();
    assert_eq!(via_rvq.data(), via_cs.data());
    assert_eq!(via_rvq.data(), rc.data());
}

#[test]
fn rvq_mode_refuses_cross_scale_multi_stream() {
    let mut cfg = CodecConfig::toy();
    cfg.mode = CodecMode::Rvq;
    let model = CodecModel::new(cfg, 3).unwrap();
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 0);
    assert!(matches!(
        model.encode(&spec, &EncodeOptions::new(2), &ctx, None),
        Err(CodecError::WrongMode(_))
    ));
    // The plain-residual path runs any stream count in this mode.
    assert!(model.rvq_encode(&spec, &EncodeOptions::new(3), &ctx, None).is_ok());
}

#[test]
fn stream_count_bounds_are_enforced() {
    let model = toy_model(4);
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 0);
    for bad in [0usize, 4, 100] {
        assert!(matches!(
            model.encode(&spec, &EncodeOptions::new(bad), &ctx, None),
            Err(CodecError::StreamCount { s, max: 3 }) if s == bad
        ));
    }
}

#[test]
fn odd_token_width_is_rejected() {
    let model = toy_model(4);
    let ctx = Ctx::infer();
    // T=10 -> W=5, which cannot pair into two-frame groups.
    let spec = toy_spec(10, 0);
    assert!(matches!(
        model.encode(&spec, &EncodeOptions::new(1), &ctx, None),
        Err(CodecError::OddWidth { w: 5 })
    ));
}

#[test]
fn tampered_code_changes_reconstruction() {
    let model = toy_model(5);
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 3);
    let out = model.encode(&spec, &EncodeOptions::new(2), &ctx, None).unwrap();
    let clean = out.reconstruction.unwrap();
    let mut payload = out.payload.unwrap();
    payload.codes[0][0] = (payload.codes[0][0] + 1) % 16;
    let dirty = model.decode(&payload, &ctx).unwrap();
    assert!(clean.data().iter().zip(dirty.data()).any(|(a, b)| a != b));
}

#[test]
fn fingerprint_gate_on_decode() {
    let model = toy_model(6);
    let ctx = Ctx::infer();
    let out = model.encode(&toy_spec(20, 1), &EncodeOptions::new(1), &ctx, None).unwrap();
    let mut payload = out.payload.unwrap();
    payload.fingerprint ^= 0xdeadbeef;
    assert!(matches!(model.decode(&payload, &ctx), Err(CodecError::Fingerprint { .. })));
    // Opting out of the check still decodes.
    assert!(model.decode_with(&payload, &ctx, false).is_ok());
}

#[test]
fn stream_prefix_is_a_valid_lower_rate_decode() {
    let model = toy_model(7);
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 5);
    let full = model.encode(&spec, &EncodeOptions::new(3), &ctx, None).unwrap();
    let payload3 = full.payload.unwrap();
    for s in 1..=2usize {
        let direct = model.encode(&spec, &EncodeOptions::new(s), &ctx, None).unwrap();
        let mut prefix = codec::EncodedPayload {
            num_streams: s as u8,
            frame_groups: payload3.frame_groups,
            codes: payload3.codes[..s].to_vec(),
            fingerprint: payload3.fingerprint,
            sample_rate: payload3.sample_rate,
            product_size: payload3.product_size,
            codebook_bits: payload3.codebook_bits,
        };
        // Stage codes of a shorter encode agree with the prefix of the
        // longer one, and decoding the prefix replays the short encode.
        assert_eq!(prefix.codes, direct.payload.unwrap().codes);
        let via_prefix = model.decode(&prefix, &ctx).unwrap();
        assert_eq!(via_prefix.data(), direct.reconstruction.unwrap().data());
        prefix.codes.clear();
    }
}

#[test]
fn sample_streams_distribution() {
    let mut rng = autograd::rng::seeded(99);
    // p = 0: always the full stack.
    assert!((0..1000).all(|_| sample_streams(6, 0.0, &mut rng) == 6));
    // p = 1: uniform over 1..=6.
    let mut counts = [0usize; 7];
    let draws = 120_000;
    for _ in 0..draws {
        counts[sample_streams(6, 1.0, &mut rng)] += 1;
    }
    assert_eq!(counts[0], 0);
    for s in 1..=6 {
        let frac = counts[s] as f64 / draws as f64;
        assert!((frac - 1.0 / 6.0).abs() < 0.02, "s={s} frac={frac}");
    }
    // p = 0.75: full stack keeps mass 0.25 + 0.75/6.
    let mut full = 0usize;
    for _ in 0..draws {
        if sample_streams(6, 0.75, &mut rng) == 6 {
            full += 1;
        }
    }
    let frac = full as f64 / draws as f64;
    assert!((frac - 0.375).abs() < 0.02, "full-stack frac {frac}");
}

#[test]
fn bypass_semantics_and_reinit() {
    let model = toy_model(8);
    let ctx = Ctx::infer();
    let spec = toy_spec(20, 2);

    let fresh: Vec<Vec<f64>> = model
        .quantizers
        .iter()
        .flat_map(|q| q.groups.iter().map(|g| g.codebook.value().to_vec()))
        .collect();

    model.set_bypass(true);
    assert!(model.bypassed());
    let out = model.encode(&spec, &EncodeOptions::new(3), &ctx, None).unwrap();
    assert!(out.payload.is_none());
    let recon = out.reconstruction.expect("bypass still reconstructs");
    assert_eq!(recon.shape(), &[2, 24, 20]);
    assert_eq!(out.vq_loss.item(), 0.0);

    // No payload can decode while bypassed.
    let other = toy_model(8);
    let p = other
        .encode(&spec, &EncodeOptions::new(1), &ctx, None)
        .unwrap()
        .payload
        .unwrap();
    assert!(matches!(model.decode(&p, &ctx), Err(CodecError::Bypassed)));

    // Scribble on a codebook while bypassed; re-activation must restore
    // the exact seeded values, and only on the first call.
    model.quantizers[0].groups[0].codebook.set(vec![7.0; 16 * 8]);
    model.set_bypass(true); // idempotent
    model.set_bypass(false);
    let after: Vec<Vec<f64>> = model
        .quantizers
        .iter()
        .flat_map(|q| q.groups.iter().map(|g| g.codebook.value().to_vec()))
        .collect();
    assert_eq!(after, fresh);

    // A later manual edit survives further set_bypass(false) calls.
    model.quantizers[0].groups[0].codebook.set(vec![3.0; 16 * 8]);
    model.set_bypass(false);
    assert_eq!(model.quantizers[0].groups[0].codebook.value()[0], 3.0);

    // And encode produces payloads again.
    assert!(model.encode(&spec, &EncodeOptions::new(1), &ctx, None).unwrap().payload.is_some());
}

#[test]
fn different_seeds_give_different_models_same_fingerprint() {
    let a = toy_model(1);
    let b = toy_model(2);
    assert_eq!(a.config.fingerprint(), b.config.fingerprint());
    let wa = a.registry.by_name("patch.embed.w").unwrap().value();
    let wb = b.registry.by_name("patch.embed.w").unwrap().value();
    assert!(wa.iter().zip(wb.iter()).any(|(x, y)| x != y));
}
