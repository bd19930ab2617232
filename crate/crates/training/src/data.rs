//! Synthetic speech-like corpus: enveloped harmonics over a low-passed
//! noise floor, peak-limited and band-limited by construction. The noise
//! floor keeps the spectra dense, which the log-mel objective needs —
//! sparse pure-tone spectra leave most mel bins at the log floor where
//! tiny leakage dominates the loss.

use autograd::rng::derive;
use rand::Rng;

/// `n` clips of `samples` mono samples each, deterministic in `seed`.
pub fn synth_corpus(n: usize, samples: usize, sample_rate: u32, seed: u64) -> Vec<Vec<f64>> {
    (0..n).map(|i| synth_clip(samples, sample_rate, seed, i as u64)).collect()
}

fn synth_clip(samples: usize, sample_rate: u32, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = derive(seed, index);
    let sr = sample_rate as f64;
    let partials = rng.gen_range(2..=5);
    let voices: Vec<(f64, f64, f64)> = (0..partials)
        .map(|k| {
            let freq = rng.gen_range(100.0..3800.0_f64);
            let amp = rng.gen_range(0.2..1.0) / (k + 1) as f64;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (freq, amp, phase)
        })
        .collect();
    let attack = rng.gen_range(0.05..0.2) * samples as f64;
    let decay = rng.gen_range(0.3..1.0) * samples as f64;
    let noise_amp = rng.gen_range(0.05..0.15);
    let cutoff = rng.gen_range(1000.0..2500.0);
    let peak_target = rng.gen_range(0.3..0.9);

    // Two cascaded one-pole low-passes shape the white noise floor so the
    // band above 6 kHz stays far below the total energy.
    let alpha = 1.0 - (-std::f64::consts::TAU * cutoff / sr).exp();
    let (mut lp1, mut lp2) = (0.0, 0.0);
    let mut clip: Vec<f64> = (0..samples)
        .map(|i| {
            let t = i as f64 / sr;
            let env = (i as f64 / attack).min(1.0) * (-(i as f64) / decay).exp();
            let tone: f64 = voices
                .iter()
                .map(|&(f, a, ph)| a * (std::f64::consts::TAU * f * t + ph).sin())
                .sum();
            let white: f64 = rng.gen_range(-1.0..1.0);
            lp1 += alpha * (white - lp1);
            lp2 += alpha * (lp1 - lp2);
            env * tone + noise_amp * lp2
        })
        .collect();
    let peak = clip.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    if peak > 0.0 {
        let k = peak_target / peak;
        for v in &mut clip {
            *v *= k;
        }
    }
    clip
}
