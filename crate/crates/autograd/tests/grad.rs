//! Gradient correctness: finite-difference checks per primitive, exact
//! straight-through routing, tape lifecycle errors, and determinism.

use autograd::tape::TapeBase;
use autograd::tensor::TensorBase;
use autograd::{check_gradients, rng, straight_through, Param, Tape, TapeError, Tensor};

fn param(name: &str, shape: &[usize], seed: u64) -> Param<f64> {
    let n: usize = shape.iter().product();
    let mut r = rng::seeded(seed);
    Param::new(name, shape, rng::normal_vec(&mut r, n, 0.0, 1.0))
}

#[test]
fn matmul_sum_of_squares_fd() {
    let a = param("a", &[3, 4], 1);
    let b = param("b", &[4, 2], 2);
    let report = check_gradients(
        &[&a, &b],
        |tape| a.tensor(tape).matmul(&b.tensor(tape)).square().sum(),
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn broadcast_arithmetic_fd() {
    let a = param("a", &[3, 4], 3);
    let b = param("b", &[4], 4);
    let report = check_gradients(
        &[&a, &b],
        |tape| {
            let at = a.tensor(tape);
            let bt = b.tensor(tape);
            at.mul(&bt).add(&bt).sub(&at.scale(0.5)).add_scalar(0.25).square().sum()
        },
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn movement_chain_fd() {
    let x = param("x", &[2, 3, 4], 5);
    let report = check_gradients(
        &[&x],
        |tape| {
            let t = x.tensor(tape).permute(&[1, 2, 0]).reshape(&[3, 8]);
            let s0 = t.slice(1, 0, 3);
            let s1 = t.slice(1, 3, 8);
            TensorBase::concat(1, &[&s1, &s0]).square().sum()
        },
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn softmax_cross_entropy_fd() {
    let x = param("logits", &[4, 5], 6);
    let mut targets = vec![0.0; 20];
    for r in 0..4 {
        targets[r * 5 + (r + 1) % 5] = 1.0;
    }
    let t = Tensor::constant(targets, &[4, 5]);
    let report = check_gradients(
        &[&x],
        |tape| x.tensor(tape).softmax_last().log().mul(&t).sum().neg(),
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-5, "fd mismatch: {report:?}");
}

#[test]
fn layer_norm_fd() {
    let x = param("x", &[3, 6], 7);
    let gamma = param("gamma", &[6], 8);
    let beta = param("beta", &[6], 9);
    let report = check_gradients(
        &[&x, &gamma, &beta],
        |tape| {
            x.tensor(tape)
                .layer_norm(&gamma.tensor(tape), &beta.tensor(tape), 1e-5)
                .square()
                .sum()
        },
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn gelu_fd() {
    let x = param("x", &[2, 7], 10);
    let report =
        check_gradients(&[&x], |tape| x.tensor(tape).gelu().square().sum(), 1e-5, 64);
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn l2_normalize_fd() {
    let x = param("x", &[4, 3], 11);
    let report = check_gradients(
        &[&x],
        |tape| {
            let w = Tensor::constant((0..12).map(|i| 0.3 + 0.1 * i as f64).collect(), &[4, 3]);
            x.tensor(tape).l2_normalize_last(1e-12).mul(&w).sum()
        },
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn pointwise_and_reductions_fd() {
    let xs: Vec<f64> = (0..8).map(|i| 0.5 + 0.25 * i as f64).collect();
    let x = Param::new("x", &[8], xs);
    let report = check_gradients(
        &[&x],
        |tape| {
            let t = x.tensor(tape);
            t.log().add(&t.square()).add(&t.abs()).mean()
        },
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn gather_scatter_fd() {
    let x = param("x", &[6], 12);
    let gather_idx = std::rc::Rc::new(vec![0usize, 5, 2, 2, 4, 1, 0, 3, 5, 5]);
    let scatter_idx = std::rc::Rc::new(vec![1usize, 0, 3, 3, 2, 4, 4, 0, 1, 2]);
    let report = check_gradients(
        &[&x],
        |tape| {
            x.tensor(tape)
                .gather(gather_idx.clone(), &[10])
                .scatter_add(scatter_idx.clone(), &[5])
                .square()
                .sum()
        },
        1e-5,
        64,
    );
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
}

#[test]
fn dead_param_has_zero_on_both_sides() {
    let x = param("x", &[3], 13);
    let unused = param("unused", &[4], 14);
    let report =
        check_gradients(&[&x, &unused], |tape| x.tensor(tape).square().sum(), 1e-5, 64);
    assert!(report.max_rel_err < 1e-6, "fd mismatch: {report:?}");
    assert_eq!(report.checked, 7);
}

#[test]
fn straight_through_routes_gradient_to_both_inputs() {
    let tape = Tape::new();
    let z_e = tape.var(vec![0.1, -0.4, 0.9], vec![3]);
    let w = tape.var(vec![0.5, 1.5, -2.0], vec![3]);
    let z_q = w.scale(2.0);
    let y = straight_through(&z_e, &z_q);
    assert_eq!(y.data(), z_q.data());
    let loss = y.square().sum();
    let grads = tape.backward(&loss).unwrap();
    // d loss / d y = 2 y; identical on z_e, chain rule x2 through w.scale(2)
    let want_ze: Vec<f64> = z_q.data().iter().map(|v| 2.0 * v).collect();
    let want_w: Vec<f64> = z_q.data().iter().map(|v| 4.0 * v).collect();
    assert_eq!(grads.of(&z_e).unwrap(), want_ze.as_slice());
    assert_eq!(grads.of(&w).unwrap(), want_w.as_slice());
}

#[test]
fn detach_blocks_gradient() {
    let tape = Tape::new();
    let x = tape.var(vec![1.0, 2.0], vec![2]);
    let loss = x.detach().square().sum().add(&x.sum());
    let grads = tape.backward(&loss).unwrap();
    assert_eq!(grads.of(&x).unwrap(), &[1.0, 1.0]);
}

#[test]
fn leaf_reuse_accumulates_gradient() {
    let p = Param::new("p", &[2], vec![3.0, -1.0]);
    let tape = Tape::new();
    let a = p.tensor(&tape);
    let b = p.tensor(&tape);
    assert_eq!(a.node_id(), b.node_id());
    let loss = a.add(&b).sum();
    let grads = tape.backward(&loss).unwrap();
    assert_eq!(grads.by_key(p.key()).unwrap(), &[2.0, 2.0]);
}

#[test]
fn backward_twice_is_an_error() {
    let tape = Tape::new();
    let x = tape.var(vec![1.0], vec![1]);
    let loss = x.square().sum();
    tape.backward(&loss).unwrap();
    assert!(matches!(tape.backward(&loss), Err(TapeError::Consumed)));
}

#[test]
fn non_scalar_loss_is_an_error() {
    let tape = Tape::new();
    let x = tape.var(vec![1.0, 2.0], vec![2]);
    let y = x.square();
    assert!(matches!(tape.backward(&y), Err(TapeError::NonScalarLoss(_))));
}

#[test]
fn loss_from_another_tape_is_an_error() {
    let t1 = Tape::new();
    let t2 = Tape::new();
    let x = t1.var(vec![1.0], vec![1]);
    let loss = x.square().sum();
    assert!(matches!(t2.backward(&loss), Err(TapeError::NotOnTape)));
}

#[test]
fn recording_after_backward_panics() {
    let tape = Tape::new();
    let x = tape.var(vec![1.0], vec![1]);
    let loss = x.square().sum();
    tape.backward(&loss).unwrap();
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
        let _ = x.square();
    }));
    assert!(result.is_err());
}

#[test]
fn gradients_are_bit_reproducible() {
    let run = || {
        let a = Param::new("a", &[4, 4], {
            let mut r = rng::seeded(42);
            rng::normal_vec(&mut r, 16, 0.0, 1.0)
        });
        let tape = Tape::new();
        let t = a.tensor(&tape);
        let loss = t.matmul(&t).gelu().square().mean();
        let g = tape.backward(&loss).unwrap();
        (loss.item().to_bits(), g.by_key(a.key()).unwrap().iter().map(|v| v.to_bits()).collect::<Vec<_>>())
    };
    assert_eq!(run(), run());
}

#[test]
fn f32_gradients_track_f64() {
    let vals: Vec<f64> = {
        let mut r = rng::seeded(77);
        rng::normal_vec(&mut r, 9, 0.0, 0.5)
    };
    let p64 = Param::new("p", &[3, 3], vals.clone());
    let t64: TapeBase<f64> = TapeBase::new();
    let l64 = p64.tensor(&t64).matmul(&p64.tensor(&t64)).gelu().sum();
    let g64 = t64.backward(&l64).unwrap();

    let p32 = Param::new("p", &[3, 3], vals.iter().map(|&v| v as f32).collect::<Vec<f32>>());
    let t32: TapeBase<f32> = TapeBase::new();
    let l32 = p32.tensor(&t32).matmul(&p32.tensor(&t32)).gelu().sum();
    let g32 = t32.backward(&l32).unwrap();

    let a = g64.by_key(p64.key()).unwrap();
    let b = g32.by_key(p32.key()).unwrap();
    for (x, y) in a.iter().zip(b) {
        assert!((x - *y as f64).abs() < 1e-3, "f32 grad {y} vs f64 {x}");
    }
}
