//! Objective quality metrics.

use autograd::Scalar;

use crate::error::DspError;

/// Scale-invariant source-to-distortion ratio in dB:
/// 10 log10(||a s||^2 / ||a s - s_hat||^2) with a = <s_hat, s> / ||s||^2.
/// Capped at +100 dB when the residual underflows, floored at -100 dB when
/// the projected target does.
pub fn si_sdr<S: Scalar>(reference: &[S], estimate: &[S]) -> Result<f64, DspError> {
    if reference.len() != estimate.len() {
        return Err(DspError::LengthMismatch { a: reference.len(), b: estimate.len() });
    }
    if reference.is_empty() {
        return Err(DspError::EmptyInput);
    }
    let mut dot = 0.0f64;
    let mut ref_energy = 0.0f64;
    for (s, e) in reference.iter().zip(estimate) {
        let (s, e) = (s.as_f64(), e.as_f64());
        dot += e * s;
        ref_energy += s * s;
    }
    if ref_energy == 0.0 {
        return Err(DspError::ZeroReference);
    }
    let alpha = dot / ref_energy;
    let mut target_energy = 0.0f64;
    let mut residual_energy = 0.0f64;
    for (s, e) in reference.iter().zip(estimate) {
        let t = alpha * s.as_f64();
        let r = t - e.as_f64();
        target_energy += t * t;
        residual_energy += r * r;
    }
    if residual_energy < 1e-12 {
        return Ok(100.0);
    }
    if target_energy < 1e-12 {
        return Ok(-100.0);
    }
    Ok(10.0 * (target_energy / residual_energy).log10())
}
