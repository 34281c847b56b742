//! Real polynomials in the unit-delay variable `d = z^-1`.
//!
//! Coefficient `c[i]` multiplies `d^i`. Trailing zeros carry no information and
//! are trimmed; leading zeros encode pure delays and are kept.

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Removes trailing exact zeros, keeping at least one coefficient.
pub fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && c[c.len() - 1] == 0.0 {
        c.pop();
    }
    if c.is_empty() {
        c.push(0.0);
    }
    c
}

pub fn is_zero(c: &[f64]) -> bool {
    c.iter().all(|&x| x == 0.0)
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return vec![0.0];
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    trim(out)
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len().max(b.len());
    let out = (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + b.get(i).copied().unwrap_or(0.0))
        .collect();
    trim(out)
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    let neg: Vec<f64> = b.iter().map(|x| -x).collect();
    add(a, &neg)
}

pub fn scale(a: &[f64], k: f64) -> Vec<f64> {
    trim(a.iter().map(|x| x * k).collect())
}

/// Multiplies by `d^n`.
pub fn shift(a: &[f64], n: usize) -> Vec<f64> {
    if is_zero(a) {
        return vec![0.0];
    }
    let mut out = vec![0.0; n];
    out.extend_from_slice(a);
    out
}

/// Evaluates the polynomial at `d` by Horner's rule.
pub fn eval(c: &[f64], d: Complex64) -> Complex64 {
    c.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &x| acc * d + x)
}

/// `true` when both polynomials agree coefficient-wise within `tol`.
pub fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|i| {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        (x - y).abs() <= tol
    })
}

/// Roots in the `z` plane of `p(z^-1) = 0`, i.e. the roots of
/// `c[0] z^n + c[1] z^(n-1) + ... + c[n]`, from companion-matrix eigenvalues.
///
/// Leading zero coefficients (pure delays) contribute no finite roots.
pub fn roots_z(c: &[f64]) -> Result<Vec<Complex64>> {
    let c = trim(c.to_vec());
    let first = match c.iter().position(|&x| x != 0.0) {
        Some(i) => i,
        None => return Ok(Vec::new()),
    };
    let c = &c[first..];
    let degree = c.len() - 1;
    if degree == 0 {
        return Ok(Vec::new());
    }
    if degree == 1 {
        return Ok(vec![Complex64::new(-c[1] / c[0], 0.0)]);
    }
    let mut companion = DMatrix::<f64>::zeros(degree, degree);
    for j in 0..degree {
        companion[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..degree {
        companion[(i, i - 1)] = 1.0;
    }
    let schur = Schur::try_new(companion, f64::EPSILON, 100 * degree.max(10))
        .ok_or(Error::RootFindingFailure { degree })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Builds `prod (1 - r d)` over the given roots. Complex roots must come in
/// conjugate pairs for the result to be real; the imaginary residue is dropped.
pub fn from_roots(roots: &[Complex64]) -> Vec<f64> {
    let mut acc = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); acc.len() + 1];
        for (i, &a) in acc.iter().enumerate() {
            next[i] += a;
            next[i + 1] -= a * r;
        }
        acc = next;
    }
    trim(acc.into_iter().map(|c| c.re).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mul_and_shift() {
        assert_eq!(mul(&[1.0, 1.0], &[1.0, -1.0]), vec![1.0, 0.0, -1.0]);
        assert_eq!(shift(&[2.0], 3), vec![0.0, 0.0, 0.0, 2.0]);
        assert_eq!(shift(&[0.0], 3), vec![0.0]);
    }

    #[test]
    fn trims_trailing_zeros() {
        assert_eq!(trim(vec![1.0, 0.0, 0.0]), vec![1.0]);
        assert_eq!(trim(vec![]), vec![0.0]);
        assert_eq!(add(&[1.0, 2.0], &[0.0, -2.0]), vec![1.0]);
    }

    #[test]
    fn roots_of_first_and_second_order() {
        let r = roots_z(&[1.0, -0.5]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0] - Complex64::new(0.5, 0.0)).norm() < 1e-15);

        // 1 + d^2 has roots +-j
        let mut r = roots_z(&[1.0, 0.0, 1.0]).unwrap();
        r.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((r[0] - Complex64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn leading_zeros_are_delays() {
        assert!(roots_z(&[0.0, 0.0, 3.0]).unwrap().is_empty());
        let r = roots_z(&[0.0, 1.0, -2.0]).unwrap();
        assert!((r[0].re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn from_roots_inverts_roots() {
        let p = vec![1.0, -0.3, 0.52, -0.1];
        let r = roots_z(&p).unwrap();
        let q = from_roots(&r);
        assert!(approx_eq(&p, &q, 1e-12), "{q:?}");
    }
}
