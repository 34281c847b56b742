//! Zero-phase-error tracking inverse.
//!
//! For `J = z^-d B(z^-1) / A(z^-1)` with `B = B_s B_u` split into zeros inside
//! and outside the unit circle, the inverse is
//!
//! ```text
//! L(z) = z^d A(z^-1) B_u(z) / (B_s(z^-1) B_u(1)^2)
//! ```
//!
//! so `J L = B_u(z^-1) B_u(z) / B_u(1)^2` is real, non-negative and equal to one
//! at DC. `B_u(z)` is a polynomial in `z`, realized as reversed coefficients
//! behind `deg(B_u)` steps of preview.

use num_complex::Complex64;

use super::TransferFunction;
use crate::error::{Error, Result};
use crate::poly;

/// Zeros closer than this to the unit circle are rejected.
const UNIT_CIRCLE_TOL: f64 = 1e-8;

pub fn zpetc_inverse(plant: &TransferFunction) -> Result<TransferFunction> {
    let poles = plant.poles()?;
    if poles.max_modulus() >= 1.0 - super::POLE_EPS {
        return Err(Error::UnstablePlant {
            max_modulus: poles.max_modulus(),
        });
    }
    if plant.is_zero() {
        return Err(Error::InvalidTransferFunction(
            "cannot invert the zero system".into(),
        ));
    }
    if plant.preview() > 0 {
        return Err(Error::InvalidTransferFunction(
            "plant must be causal".into(),
        ));
    }
    let delay = plant.num().iter().take_while(|&&c| c == 0.0).count();
    let b = &plant.num()[delay..];

    let zeros = poly::roots_z(b)?;
    if let Some(z) = zeros
        .iter()
        .find(|z| (z.norm() - 1.0).abs() < UNIT_CIRCLE_TOL)
    {
        return Err(Error::ZeroOnUnitCircle { modulus: z.norm() });
    }
    let (unstable, stable): (Vec<Complex64>, Vec<Complex64>) =
        zeros.into_iter().partition(|z| z.norm() > 1.0);

    let (b_stable, b_unstable) = if unstable.is_empty() {
        (b.to_vec(), vec![1.0])
    } else {
        (
            poly::scale(&poly::from_roots(&stable), b[0]),
            poly::from_roots(&unstable),
        )
    };
    let dc: f64 = b_unstable.iter().sum();
    let reversed: Vec<f64> = b_unstable.iter().rev().copied().collect();
    let num = poly::scale(&poly::mul(plant.den(), &reversed), 1.0 / (dc * dc));
    let preview = delay + b_unstable.len() - 1;
    TransferFunction::new(num, b_stable, preview)?.with_sample_time(plant.sample_time())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::uniform_grid;

    #[test]
    fn pure_delay_inverts_to_advance() {
        for d in [1, 3, 7] {
            let l = zpetc_inverse(&TransferFunction::delay(d)).unwrap();
            assert_eq!(l, TransferFunction::advance(d));
        }
    }

    #[test]
    fn minimum_phase_inverse_is_exact() {
        let j = TransferFunction::new(vec![0.0, 0.2, 0.1], vec![1.0, -1.2, 0.5], 0).unwrap();
        let l = zpetc_inverse(&j).unwrap();
        assert_eq!(l.preview(), 1);
        for w in uniform_grid(4096) {
            let e = (1.0 - j.eval(w).unwrap() * l.eval(w).unwrap()).norm();
            assert!(e <= 1e-10, "omega {w}: {e}");
        }
    }

    #[test]
    fn non_minimum_phase_inverse_is_zero_phase() {
        // zero at z = -1.5
        let j = TransferFunction::new(vec![0.0, 0.4, 0.6], vec![1.0, -0.7, 0.1], 0).unwrap();
        let l = zpetc_inverse(&j).unwrap();
        assert_eq!(l.preview(), 2);
        let dc = j.eval(0.0).unwrap() * l.eval(0.0).unwrap();
        assert!((dc - 1.0).norm() < 1e-12);
        for w in uniform_grid(4096) {
            let g = j.eval(w).unwrap() * l.eval(w).unwrap();
            if g.norm() > 1e-6 {
                assert!(g.arg().abs() <= 1e-9, "omega {w}: phase {}", g.arg());
            }
        }
    }

    #[test]
    fn rejects_unstable_plant_and_unit_circle_zero() {
        let unstable = TransferFunction::new(vec![0.0, 1.0], vec![1.0, -1.1], 0).unwrap();
        assert!(matches!(
            zpetc_inverse(&unstable),
            Err(Error::UnstablePlant { .. })
        ));
        let boundary = TransferFunction::new(vec![0.0, 1.0, 1.0], vec![1.0, -0.5], 0).unwrap();
        assert!(matches!(
            zpetc_inverse(&boundary),
            Err(Error::ZeroOnUnitCircle { .. })
        ));
    }
}
