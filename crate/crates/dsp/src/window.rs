//! Tapering windows.

use autograd::Scalar;

/// Periodic Hann window: w[i] = 0.5 (1 - cos(2 pi i / n)).
pub fn hann_periodic<S: Scalar>(n: usize) -> Vec<S> {
    (0..n)
        .map(|i| {
            let v = 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos());
            S::lit(v)
        })
        .collect()
}
