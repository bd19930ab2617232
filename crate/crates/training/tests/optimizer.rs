//! AdamW semantics pinned against hand-derived values.

use autograd::{Param, Tape, Tensor};
use codec::layers::P;
use std::rc::Rc;
use training::{global_grad_norm, AdamW};

/// Builds one leaf param and a grads table holding exactly `g` for it,
/// via the identity `d/dp sum(p * c) = c`.
fn grads_for(p: &P, g: &[f64]) -> autograd::Grads<f64> {
    let tape = Tape::new();
    let t = p.tensor(&tape);
    let c = Tensor::constant(g.to_vec(), &[g.len()]);
    let loss = t.mul(&c).sum();
    tape.backward(&loss).unwrap()
}

#[test]
fn first_step_matches_hand_derivation() {
    let p: P = Rc::new(Param::new("w", &[2], vec![1.0, -2.0]));
    let g = [0.5, -1.5];
    let grads = grads_for(&p, &g);
    assert_eq!(grads.by_key(p.key()).unwrap(), &g);

    let mut opt = AdamW::new(0.1, 0.1);
    let norm = opt.step(&[p.clone()], &grads, None);
    assert!((norm - (0.25f64 + 2.25).sqrt()).abs() < 1e-15);
    assert_eq!(opt.steps_taken(), 1);

    // Decoupled decay first, then bias-corrected moments. After one step
    // the corrections cancel: m_hat = g, v_hat = g^2.
    let mut want = [1.0, -2.0];
    for i in 0..2 {
        want[i] *= 1.0 - 0.1 * 0.1;
        want[i] -= 0.1 * g[i] / (g[i].abs() + 1e-8);
    }
    assert_eq!(*p.value(), want);
}

#[test]
fn second_step_applies_moment_memory() {
    let p: P = Rc::new(Param::new("w", &[1], vec![0.4]));
    let mut opt = AdamW::new(0.05, 0.2);
    let (g1, g2) = (0.8, -0.3);
    opt.step(&[p.clone()], &grads_for(&p, &[g1]), None);
    opt.step(&[p.clone()], &grads_for(&p, &[g2]), None);

    // Replay the two updates in plain arithmetic.
    let (lr, wd, b1, b2, eps) = (0.05, 0.2, 0.9, 0.999, 1e-8);
    let mut x = 0.4;
    let (mut m, mut v) = (0.0, 0.0);
    for (t, g) in [(1, g1), (2, g2)] {
        x *= 1.0 - lr * wd;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - f64::powi(b1, t));
        let vh = v / (1.0 - f64::powi(b2, t));
        x -= lr * mh / (vh.sqrt() + eps);
    }
    assert_eq!(*p.value(), [x]);
    assert_eq!(opt.steps_taken(), 2);
}

#[test]
fn zero_gradient_still_decays() {
    let p: P = Rc::new(Param::new("w", &[2], vec![3.0, -5.0]));
    // loss = 0 * sum(p) gives an all-zero gradient that is still present.
    let grads = grads_for(&p, &[0.0, 0.0]);
    let mut opt = AdamW::new(0.1, 0.5);
    opt.step(&[p.clone()], &grads, None);
    assert_eq!(*p.value(), [3.0 * 0.95, -5.0 * 0.95]);
}

#[test]
fn params_without_gradients_are_untouched() {
    let hot: P = Rc::new(Param::new("hot", &[1], vec![1.0]));
    let cold: P = Rc::new(Param::new("cold", &[2], vec![2.0, -7.0]));
    let grads = grads_for(&hot, &[1.0]);
    let mut opt = AdamW::new(0.1, 0.9);
    opt.step(&[hot.clone(), cold.clone()], &grads, None);
    assert_ne!(hot.value()[0], 1.0);
    // No update and, crucially, no decay either.
    assert_eq!(*cold.value(), [2.0, -7.0]);
}

#[test]
fn zero_lr_changes_nothing() {
    let p: P = Rc::new(Param::new("w", &[2], vec![0.25, -0.75]));
    let grads = grads_for(&p, &[10.0, -3.0]);
    let mut opt = AdamW::new(0.0, 0.1);
    opt.step(&[p.clone()], &grads, None);
    assert_eq!(*p.value(), [0.25, -0.75]);
}

#[test]
fn global_norm_spans_params_and_clip_rescales() {
    let a: P = Rc::new(Param::new("a", &[2], vec![0.0, 0.0]));
    let b: P = Rc::new(Param::new("b", &[1], vec![0.0]));
    // Joint tape so both grads land in one table.
    let tape = Tape::new();
    let la = a.tensor(&tape).mul(&Tensor::constant(vec![3.0, 4.0], &[2])).sum();
    let lb = b.tensor(&tape).mul(&Tensor::constant(vec![12.0], &[1])).sum();
    let grads = tape.backward(&la.add(&lb)).unwrap();
    let params = [a.clone(), b.clone()];
    assert_eq!(global_grad_norm(&params, &grads), 13.0);

    // clip = 6.5 halves every gradient; after one step m_hat = g/2.
    let mut opt = AdamW::new(0.1, 0.0);
    let norm = opt.step(&params, &grads, Some(6.5));
    assert_eq!(norm, 13.0);
    let upd = |g: f64| -0.1 * (g / 2.0) / ((g / 2.0).abs() + 1e-8);
    assert_eq!(*a.value(), [upd(3.0), upd(4.0)]);
    assert_eq!(*b.value(), [upd(12.0)]);
}

#[test]
fn clip_is_inert_below_threshold() {
    let p: P = Rc::new(Param::new("w", &[1], vec![1.0]));
    let g = grads_for(&p, &[0.6]);
    let mut clipped = AdamW::new(0.1, 0.0);
    clipped.step(&[p.clone()], &g, Some(10.0));
    let after_clipped = p.value()[0];

    let q: P = Rc::new(Param::new("w", &[1], vec![1.0]));
    let g2 = grads_for(&q, &[0.6]);
    let mut plain = AdamW::new(0.1, 0.0);
    plain.step(&[q.clone()], &g2, None);
    assert_eq!(after_clipped, q.value()[0]);
}
