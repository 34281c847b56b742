#![allow(dead_code)]

use std::f64::consts::PI;

use isrc_core::lti::TransferFunction;
use isrc_core::poly;
use num_complex::Complex64;
use proptest::prelude::*;

/// Poles inside the disk of this radius.
pub const MAX_POLE_RADIUS: f64 = 0.9;

fn denominator(pairs: &[(f64, f64)], reals: &[f64]) -> Vec<f64> {
    let mut roots = Vec::new();
    for &(r, theta) in pairs {
        let p = Complex64::from_polar(r, theta);
        roots.push(p);
        roots.push(p.conj());
    }
    roots.extend(reals.iter().map(|&r| Complex64::new(r, 0.0)));
    poly::from_roots(&roots)
}

/// Stable, strictly proper systems of order one to four.
pub fn stable_tf() -> impl Strategy<Value = TransferFunction> {
    (
        prop::collection::vec((0.0..MAX_POLE_RADIUS, 0.0..PI), 0..=1),
        prop::collection::vec(-MAX_POLE_RADIUS..MAX_POLE_RADIUS, 1..=2),
        prop::collection::vec(-1.0f64..1.0, 1..=3),
        1usize..=2,
    )
        .prop_filter_map("zero numerator", |(pairs, reals, b, delay)| {
            if b.iter().all(|c| c.abs() < 1e-3) {
                return None;
            }
            let num = poly::shift(&b, delay);
            TransferFunction::new(num, denominator(&pairs, &reals), 0).ok()
        })
}

/// Stable, strictly proper, minimum-phase systems with unit delay.
pub fn minimum_phase_tf() -> impl Strategy<Value = TransferFunction> {
    (
        prop::collection::vec((0.0..MAX_POLE_RADIUS, 0.0..PI), 0..=1),
        prop::collection::vec(-MAX_POLE_RADIUS..MAX_POLE_RADIUS, 1..=2),
        prop::collection::vec(-0.8f64..0.8, 0..=2),
        0.2f64..2.0,
    )
        .prop_map(|(pairs, reals, zeros, gain)| {
            let zeros: Vec<Complex64> = zeros.iter().map(|&z| Complex64::new(z, 0.0)).collect();
            let num = poly::shift(&poly::scale(&poly::from_roots(&zeros), gain), 1);
            TransferFunction::new(num, denominator(&pairs, &reals), 0).unwrap()
        })
}

/// DFT of a real sequence of even length `n` at `omega_i = 2 pi i / n`,
/// `i = 0..=n/2`.
pub fn dft_half(x: &[f64]) -> Vec<Complex64> {
    use rustfft::FftPlanner;
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    buf.truncate(x.len() / 2 + 1);
    buf
}
