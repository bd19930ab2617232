//! Central-difference gradient checking.
//!
//! Recomputes the loss with each probed parameter entry nudged by ±eps and
//! compares (f(x+e) - f(x-e)) / 2e against the tape gradient. The loss
//! closure must rebuild the graph from current parameter values on every
//! call.

use crate::param::Param;
use crate::scalar::Scalar;
use crate::tape::TapeBase;
use crate::tensor::TensorBase;

#[derive(Debug, Clone)]
pub struct FdWorst {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst: Option<FdWorst>,
    pub checked: usize,
}

/// Checks tape gradients of `loss_fn` against central differences.
///
/// Probes at most `max_checks` evenly spaced entries per parameter. The
/// reported error is relative where the gradient scale exceeds 1e-6 and
/// absolute below that, so near-zero gradients do not blow up the ratio.
pub fn check_gradients<T, F>(
    params: &[&Param<T>],
    loss_fn: F,
    eps: f64,
    max_checks: usize,
) -> FdReport
where
    T: Scalar,
    F: FnMut(&TapeBase<T>) -> TensorBase<T>,
{
    check_gradients_floored(params, loss_fn, eps, max_checks, 1e-6)
}

/// `check_gradients` with an explicit scale floor: gradients whose
/// magnitude stays under `floor` are compared absolutely. Raise the floor
/// when the loss is large relative to eps, where difference-quotient
/// round-off noise dwarfs genuinely tiny gradients.
pub fn check_gradients_floored<T, F>(
    params: &[&Param<T>],
    mut loss_fn: F,
    eps: f64,
    max_checks: usize,
    floor: f64,
) -> FdReport
where
    T: Scalar,
    F: FnMut(&TapeBase<T>) -> TensorBase<T>,
{
    let tape = TapeBase::new();
    let loss = loss_fn(&tape);
    let grads = tape.backward(&loss).expect("check_gradients: backward failed");

    let eval = |f: &mut F| -> f64 {
        let t = TapeBase::new();
        f(&t).item().as_f64()
    };

    let mut report = FdReport { max_rel_err: 0.0, worst: None, checked: 0 };
    for p in params {
        let analytic = grads.by_key(p.key());
        let n = p.len();
        if n == 0 {
            continue;
        }
        let step = (n / max_checks.max(1)).max(1);
        for i in (0..n).step_by(step) {
            let orig = p.value()[i];
            p.update(|v| v[i] = orig + T::lit(eps));
            let plus = eval(&mut loss_fn);
            p.update(|v| v[i] = orig - T::lit(eps));
            let minus = eval(&mut loss_fn);
            p.update(|v| v[i] = orig);

            let numeric = (plus - minus) / (2.0 * eps);
            let an = analytic.map_or(0.0, |g| g[i].as_f64());
            let scale = numeric.abs().max(an.abs());
            let err = if scale < floor { (numeric - an).abs() } else { (numeric - an).abs() / scale };
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some(FdWorst {
                    param: p.name().to_string(),
                    index: i,
                    analytic: an,
                    numeric,
                });
            }
        }
    }
    report
}
