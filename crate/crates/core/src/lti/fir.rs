use std::f64::consts::PI;

use super::TransferFunction;
use crate::error::{Error, Result};

/// Zero-phase low-pass `Q(z) = sum_{n=-m}^{m} q_n z^-n` by the Hann-windowed
/// sinc method, normalized to unit DC gain and realized with preview `m`.
pub fn zero_phase_fir_lowpass(cutoff: f64, half_order: usize) -> Result<TransferFunction> {
    if !(cutoff > 0.0 && cutoff <= PI) {
        return Err(Error::InvalidParameters(format!(
            "cutoff {cutoff} outside (0, pi]"
        )));
    }
    let m = half_order;
    // one side, n = 0..=m
    let side: Vec<f64> = (0..=m)
        .map(|n| {
            let ideal = if n == 0 {
                cutoff / PI
            } else {
                (cutoff * n as f64).sin() / (PI * n as f64)
            };
            let window = 0.5 * (1.0 + (PI * n as f64 / (m + 1) as f64).cos());
            ideal * window
        })
        .collect();
    let sum = side[0] + 2.0 * side[1..].iter().sum::<f64>();
    let taps: Vec<f64> = (0..=2 * m).map(|i| side[i.abs_diff(m)] / sum).collect();
    TransferFunction::new(taps, vec![1.0], m)
}

/// `true` when the causal taps of `q` are an exactly symmetric FIR centred on
/// its preview.
pub fn is_zero_phase_fir(q: &TransferFunction) -> bool {
    let taps = q.num();
    q.den() == [1.0] && taps.len() == 2 * q.preview() + 1 && taps.iter().eq(taps.iter().rev())
}
