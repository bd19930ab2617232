//! Forward-value oracles for every primitive: hand-computed outputs, exact
//! identities, movement round-trips, and shape-error messages.

use std::rc::Rc;

use autograd::tensor::TensorBase;
use autograd::{straight_through, Tensor};

fn assert_close(got: &[f64], want: &[f64], tol: f64) {
    assert_eq!(got.len(), want.len(), "length mismatch");
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        assert!(
            (g - w).abs() <= tol,
            "index {i}: got {g}, want {w} (tol {tol})"
        );
    }
}

#[test]
fn matmul_hand_oracle() {
    // [[1,2,3],[4,5,6]] x [[7,8],[9,10],[11,12]] = [[58,64],[139,154]]
    let a = Tensor::constant(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
    let b = Tensor::constant(vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0], &[3, 2]);
    let c = a.matmul(&b);
    assert_eq!(c.shape(), &[2, 2]);
    assert_eq!(c.data(), &[58.0, 64.0, 139.0, 154.0]);
}

#[test]
fn matmul_identity_is_exact() {
    let a = Tensor::constant(vec![0.1, -2.5, 3.75, 4.0, 1e-9, -7.25], &[2, 3]);
    let mut eye = vec![0.0; 9];
    for i in 0..3 {
        eye[i * 3 + i] = 1.0;
    }
    let c = a.matmul(&Tensor::constant(eye, &[3, 3]));
    assert_eq!(c.data(), a.data());
}

#[test]
#[should_panic(expected = "matmul")]
fn matmul_shape_mismatch_names_primitive() {
    let a = Tensor::zeros(&[2, 3]);
    let b = Tensor::zeros(&[4, 2]);
    let _ = a.matmul(&b);
}

#[test]
fn broadcast_add_sub_mul() {
    let a = Tensor::constant(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
    let b = Tensor::constant(vec![10.0, 20.0, 30.0], &[3]);
    assert_eq!(a.add(&b).data(), &[11.0, 22.0, 33.0, 14.0, 25.0, 36.0]);
    assert_eq!(a.sub(&b).data(), &[-9.0, -18.0, -27.0, -6.0, -15.0, -24.0]);
    assert_eq!(a.mul(&b).data(), &[10.0, 40.0, 90.0, 40.0, 100.0, 180.0]);
    let s = Tensor::scalar(2.0);
    assert_eq!(a.mul(&s).data(), &[2.0, 4.0, 6.0, 8.0, 10.0, 12.0]);
}

#[test]
#[should_panic(expected = "broadcast")]
fn broadcast_rejects_non_suffix() {
    let a = Tensor::zeros(&[2, 3]);
    let b = Tensor::zeros(&[2]);
    let _ = a.add(&b);
}

#[test]
fn scale_add_scalar_neg() {
    let a = Tensor::constant(vec![1.0, -2.0], &[2]);
    assert_eq!(a.scale(3.0).data(), &[3.0, -6.0]);
    assert_eq!(a.add_scalar(1.5).data(), &[2.5, -0.5]);
    assert_eq!(a.neg().data(), &[-1.0, 2.0]);
}

#[test]
fn movement_round_trips_are_bit_exact() {
    let vals: Vec<f64> = (0..24).map(|i| (i as f64) * 0.37 - 4.2).collect();
    let x = Tensor::constant(vals.clone(), &[2, 3, 4]);

    let p = x.permute(&[2, 0, 1]);
    assert_eq!(p.shape(), &[4, 2, 3]);
    let back = p.permute(&[1, 2, 0]);
    assert_eq!(back.data(), x.data());

    let r = x.reshape(&[6, 4]).reshape(&[2, 3, 4]);
    assert_eq!(r.data(), x.data());

    let s0 = x.slice(1, 0, 1);
    let s1 = x.slice(1, 1, 3);
    let cat = Tensor::concat(1, &[&s0, &s1]);
    assert_eq!(cat.shape(), &[2, 3, 4]);
    assert_eq!(cat.data(), x.data());
}

#[test]
fn permute_hand_oracle() {
    // [2,3] transpose
    let x = Tensor::constant(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3]);
    let t = x.transpose(0, 1);
    assert_eq!(t.shape(), &[3, 2]);
    assert_eq!(t.data(), &[1.0, 4.0, 2.0, 5.0, 3.0, 6.0]);
}

#[test]
fn slice_hand_oracle() {
    let x = Tensor::constant((0..12).map(f64::from).collect(), &[3, 4]);
    let s = x.slice(1, 1, 3);
    assert_eq!(s.shape(), &[3, 2]);
    assert_eq!(s.data(), &[1.0, 2.0, 5.0, 6.0, 9.0, 10.0]);
    let r = x.slice(0, 2, 3);
    assert_eq!(r.data(), &[8.0, 9.0, 10.0, 11.0]);
}

#[test]
fn softmax_rows_sum_to_one_and_mask_underflows_to_zero() {
    let x = Tensor::constant(vec![0.3, -1.2, 2.4, 0.0, 0.0, 0.0], &[2, 3]);
    let y = x.softmax_last();
    for r in 0..2 {
        let s: f64 = y.data()[r * 3..(r + 1) * 3].iter().sum();
        assert!((s - 1.0).abs() < 1e-12, "row {r} sums to {s}");
    }
    assert_eq!(&y.data()[3..6], &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);

    let masked = Tensor::constant(vec![1.0, -1e30, -1e30], &[1, 3]).softmax_last();
    assert_eq!(masked.data(), &[1.0, 0.0, 0.0]);
}

#[test]
fn layer_norm_constant_row_yields_shift() {
    let x = Tensor::constant(vec![5.0; 4], &[1, 4]);
    let gamma = Tensor::constant(vec![2.0, 3.0, 4.0, 5.0], &[4]);
    let beta = Tensor::constant(vec![0.5, -0.5, 1.5, -1.5], &[4]);
    let y = x.layer_norm(&gamma, &beta, 1e-5);
    assert_eq!(y.data(), beta.data());
}

#[test]
fn layer_norm_hand_oracle() {
    // x=[1,2,3], eps=0: mean 2, biased var 2/3, xhat = +-sqrt(3/2), 0
    let x = Tensor::constant(vec![1.0, 2.0, 3.0], &[1, 3]);
    let gamma = Tensor::constant(vec![1.0; 3], &[3]);
    let beta = Tensor::constant(vec![0.0; 3], &[3]);
    let y = x.layer_norm(&gamma, &beta, 0.0);
    let v = 1.224744871391589_f64;
    assert_close(y.data(), &[-v, 0.0, v], 1e-12);
}

#[test]
fn gelu_oracle_values() {
    let x = Tensor::constant(vec![0.0, 1.0, -1.0, 10.0, -10.0], &[5]);
    let y = x.gelu();
    assert_eq!(y.data()[0], 0.0);
    // tanh-form reference values
    assert!((y.data()[1] - 0.8411919906082768).abs() < 1e-12);
    assert!((y.data()[2] - (-0.15880800939172324)).abs() < 1e-12);
    assert!((y.data()[3] - 10.0).abs() < 1e-9);
    assert!(y.data()[4].abs() < 1e-9);
}

#[test]
fn l2_normalize_rows_are_unit_and_zero_rows_stay_finite() {
    let x = Tensor::constant(vec![3.0, 4.0, 0.0, 0.0], &[2, 2]);
    let y = x.l2_normalize_last(1e-12);
    assert_close(&y.data()[0..2], &[0.6, 0.8], 1e-12);
    assert_eq!(&y.data()[2..4], &[0.0, 0.0]);
    let n: f64 = y.data()[0..2].iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((n - 1.0).abs() < 1e-12);
}

#[test]
fn reductions_and_pointwise() {
    let x = Tensor::constant(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]);
    assert_eq!(x.sum().item(), 10.0);
    assert_eq!(x.mean().item(), 2.5);
    assert_eq!(x.square().data(), &[1.0, 4.0, 9.0, 16.0]);
    let a = Tensor::constant(vec![-1.5, 0.0, 2.5], &[3]);
    assert_eq!(a.abs().data(), &[1.5, 0.0, 2.5]);
    let l = Tensor::constant(vec![1.0, std::f64::consts::E], &[2]).log();
    assert_close(l.data(), &[0.0, 1.0], 1e-15);
}

#[test]
fn gather_and_scatter_add_hand_oracles() {
    let x = Tensor::constant(vec![10.0, 20.0, 30.0], &[3]);
    let idx = Rc::new(vec![2usize, 0, 0, 1]);
    let g = x.gather(idx, &[4]);
    assert_eq!(g.data(), &[30.0, 10.0, 10.0, 20.0]);

    let y = Tensor::constant(vec![1.0, 2.0, 3.0, 4.0], &[4]);
    let idx = Rc::new(vec![1usize, 1, 0, 2]);
    let s = y.scatter_add(idx, &[3]);
    assert_eq!(s.data(), &[3.0, 3.0, 4.0]);
}

#[test]
#[should_panic(expected = "gather")]
fn gather_rejects_out_of_bounds() {
    let x = Tensor::constant(vec![1.0, 2.0], &[2]);
    let _ = x.gather(Rc::new(vec![2usize]), &[1]);
}

#[test]
fn straight_through_forwards_quantized_values() {
    let z_e = Tensor::constant(vec![0.1, 0.2], &[2]);
    let z_q = Tensor::constant(vec![1.0, -1.0], &[2]);
    let y = straight_through(&z_e, &z_q);
    assert_eq!(y.data(), z_q.data());
}

#[test]
fn f32_smoke() {
    type T32 = TensorBase<f32>;
    let a = T32::constant(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]);
    let b = T32::constant(vec![0.5, -0.5, 1.0, 2.0], &[2, 2]);
    let c = a.matmul(&b).gelu().sum();
    assert!(c.item().is_finite());
}

#[test]
fn detach_shares_values_but_drops_tape() {
    let tape = autograd::Tape::new();
    let x = tape.var(vec![1.0, 2.0], vec![2]);
    let d = x.detach();
    assert_eq!(d.data(), x.data());
    assert!(d.node_id().is_none());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn permute_round_trip(vals in proptest::collection::vec(-10.0f64..10.0, 24)) {
            let x = Tensor::constant(vals, &[2, 3, 4]);
            for perm in [[0usize, 1, 2], [2, 1, 0], [1, 2, 0], [2, 0, 1]] {
                let mut inv = [0usize; 3];
                for (i, &p) in perm.iter().enumerate() { inv[p] = i; }
                let rt = x.permute(&perm).permute(&inv);
                prop_assert_eq!(rt.data(), x.data());
            }
        }

        #[test]
        fn softmax_rows_always_sum_to_one(vals in proptest::collection::vec(-50.0f64..50.0, 20)) {
            let x = Tensor::constant(vals, &[4, 5]);
            let y = x.softmax_last();
            for r in 0..4 {
                let s: f64 = y.data()[r * 5..(r + 1) * 5].iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }
}
