//! Discrete-time SISO LTI systems as rational functions of the unit delay.

mod filter;
mod fir;
mod frf;
mod zpetc;

pub use filter::FilterState;
pub use fir::{is_zero_phase_fir, zero_phase_fir_lowpass};
pub use frf::{FrfData, FrfSource};
pub use zpetc::zpetc_inverse;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Radius margin for the open-unit-disk test.
pub const POLE_EPS: f64 = 1e-9;

/// Below this magnitude a denominator is treated as vanishing on the unit circle.
pub const DEN_ZERO_TOL: f64 = 1e-12;

/// Tolerance for matching common factors in [`TransferFunction::add`].
pub const FACTOR_MATCH_TOL: f64 = 1e-12;

/// `G(z) = z^preview * num(z^-1) / den(z^-1)`.
///
/// Stored normalized: `den[0] == 1`, no trailing zeros, and the preview is
/// reduced against leading zeros of the numerator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTransferFunction", into = "RawTransferFunction")]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
    preview: usize,
    sample_time: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTransferFunction {
    num: Vec<f64>,
    #[serde(default = "default_den")]
    den: Vec<f64>,
    #[serde(default)]
    preview: usize,
    #[serde(default = "default_sample_time")]
    sample_time: f64,
}

fn default_den() -> Vec<f64> {
    vec![1.0]
}

fn default_sample_time() -> f64 {
    1.0
}

impl TryFrom<RawTransferFunction> for TransferFunction {
    type Error = Error;

    fn try_from(raw: RawTransferFunction) -> Result<Self> {
        TransferFunction::new(raw.num, raw.den, raw.preview)?.with_sample_time(raw.sample_time)
    }
}

impl From<TransferFunction> for RawTransferFunction {
    fn from(tf: TransferFunction) -> Self {
        RawTransferFunction {
            num: tf.num,
            den: tf.den,
            preview: tf.preview,
            sample_time: tf.sample_time,
        }
    }
}

impl TransferFunction {
    pub fn new(num: Vec<f64>, den: Vec<f64>, preview: usize) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidTransferFunction(
                "coefficients must be finite".into(),
            ));
        }
        let lead = den.first().copied().unwrap_or(0.0);
        if lead == 0.0 {
            return Err(Error::InvalidTransferFunction(
                "den[0] must be non-zero".into(),
            ));
        }
        let mut num = poly::scale(&num, 1.0 / lead);
        let den = poly::scale(&den, 1.0 / lead);
        let mut preview = preview;
        if poly::is_zero(&num) {
            preview = 0;
            num = vec![0.0];
        } else {
            while preview > 0 && num[0] == 0.0 {
                num.remove(0);
                preview -= 1;
            }
        }
        Ok(Self {
            num,
            den,
            preview,
            sample_time: 1.0,
        })
    }

    pub fn with_sample_time(mut self, sample_time: f64) -> Result<Self> {
        if !(sample_time.is_finite() && sample_time > 0.0) {
            return Err(Error::InvalidTransferFunction(
                "sample_time must be positive".into(),
            ));
        }
        self.sample_time = sample_time;
        Ok(self)
    }

    /// Causal FIR filter with the given taps.
    pub fn fir(taps: Vec<f64>) -> Result<Self> {
        Self::new(taps, vec![1.0], 0)
    }

    pub fn gain(k: f64) -> Self {
        Self::new(vec![k], vec![1.0], 0).expect("finite gain")
    }

    pub fn unity() -> Self {
        Self::gain(1.0)
    }

    pub fn zero() -> Self {
        Self::gain(0.0)
    }

    /// `z^-n`.
    pub fn delay(n: usize) -> Self {
        Self::new(poly::shift(&[1.0], n), vec![1.0], 0).expect("valid delay")
    }

    /// `z^+n`.
    pub fn advance(n: usize) -> Self {
        Self::new(vec![1.0], vec![1.0], n).expect("valid advance")
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn preview(&self) -> usize {
        self.preview
    }

    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }

    pub fn is_zero(&self) -> bool {
        poly::is_zero(&self.num)
    }

    /// Direct feedthrough `lim_{z->inf} G(z)`; infinite for previewing systems.
    pub fn feedthrough(&self) -> f64 {
        if self.is_zero() {
            0.0
        } else if self.preview > 0 {
            f64::INFINITY
        } else {
            self.num[0]
        }
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.feedthrough() == 0.0
    }

    /// The causal part `z^-preview G(z)`.
    pub fn causal_part(&self) -> Self {
        Self {
            num: self.num.clone(),
            den: self.den.clone(),
            preview: 0,
            sample_time: self.sample_time,
        }
    }

    /// Numerator (with the preview factor) and denominator evaluated at
    /// `z = e^{j omega}` without dividing, so poles on the unit circle are
    /// representable.
    pub fn eval_parts(&self, omega: f64) -> (Complex64, Complex64) {
        let d = Complex64::from_polar(1.0, -omega);
        let advance = if self.preview == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, omega * self.preview as f64)
        };
        (poly::eval(&self.num, d) * advance, poly::eval(&self.den, d))
    }

    /// `G(e^{j omega})`.
    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let (n, d) = self.eval_parts(omega);
        if d.norm() < DEN_ZERO_TOL {
            return Err(Error::DenominatorZeroOnGrid {
                omega,
                magnitude: d.norm(),
            });
        }
        Ok(n / d)
    }

    pub fn freq_response(&self, omegas: &[f64]) -> Result<FrfData> {
        let values = omegas
            .iter()
            .map(|&w| self.eval(w))
            .collect::<Result<Vec<_>>>()?;
        FrfData::new(omegas.to_vec(), values, FrfSource::Model)
    }

    /// Zero-state response. Previewed samples beyond the end of the record are
    /// taken as zero, so the last `preview` outputs carry an end transient.
    pub fn simulate(&self, input: &[f64]) -> Vec<f64> {
        let mut state = FilterState::new(self);
        let p = self.preview;
        (0..input.len())
            .map(|k| {
                let x = input.get(k + p).copied().unwrap_or(0.0);
                state.step(&self.num, &self.den, x)
            })
            .collect()
    }

    pub fn poles(&self) -> Result<PoleSet> {
        Ok(PoleSet {
            poles: poly::roots_z(&self.den)?,
        })
    }

    pub fn is_internally_stable(&self) -> Result<bool> {
        Ok(self.poles()?.max_modulus() < 1.0 - POLE_EPS)
    }

    /// Zeros in the `z` plane, excluding the origin.
    pub fn zeros(&self) -> Result<Vec<Complex64>> {
        poly::roots_z(&self.num)
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = Self::new(poly::scale(&self.num, k), self.den.clone(), self.preview)
            .expect("scaling keeps the denominator");
        out.sample_time = self.sample_time;
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(-1.0)
    }

    /// Numerator written over the common preview `p >= self.preview`.
    fn num_at_preview(&self, p: usize) -> Vec<f64> {
        poly::shift(&self.num, p - self.preview)
    }

    pub fn add(&self, other: &Self) -> Self {
        let p = self.preview.max(other.preview);
        let a = self.num_at_preview(p);
        let b = other.num_at_preview(p);
        let (num, den) = if poly::approx_eq(&self.den, &other.den, FACTOR_MATCH_TOL) {
            (poly::add(&a, &b), self.den.clone())
        } else {
            (
                poly::add(&poly::mul(&a, &other.den), &poly::mul(&b, &self.den)),
                poly::mul(&self.den, &other.den),
            )
        };
        let mut out = Self::new(num, den, p).expect("product of valid denominators");
        out.sample_time = self.sample_time;
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::new(
            poly::mul(&self.num, &other.num),
            poly::mul(&self.den, &other.den),
            self.preview + other.preview,
        )
        .expect("product of valid denominators");
        out.sample_time = self.sample_time;
        out
    }

    /// Numerator and denominator of the loop `G H` brought to a common causal
    /// form: `G H = num / (den * z^-p)` with `p` the loop preview.
    fn loop_parts(g: &Self, h: &Self) -> (Vec<f64>, Vec<f64>) {
        let gh = g.mul(h);
        (gh.num.clone(), poly::shift(&gh.den, gh.preview))
    }

    /// Complementary sensitivity `(1 + G H)^-1 G H`.
    pub fn feedback(g: &Self, h: &Self) -> Result<Self> {
        let (n, d) = Self::loop_parts(g, h);
        if poly::is_zero(&n) {
            return Ok(Self::zero());
        }
        let den = poly::add(&d, &n);
        if den[0] == 0.0 {
            return Err(Error::AlgebraicLoop);
        }
        let mut out = Self::new(n, den, 0)?;
        out.sample_time = g.sample_time;
        Ok(out)
    }

    /// Sensitivity `(1 + G H)^-1`.
    pub fn sensitivity(g: &Self, h: &Self) -> Result<Self> {
        let (n, d) = Self::loop_parts(g, h);
        if poly::is_zero(&n) {
            return Ok(Self::unity());
        }
        let den = poly::add(&d, &n);
        if den[0] == 0.0 {
            return Err(Error::AlgebraicLoop);
        }
        let mut out = Self::new(d, den, 0)?;
        out.sample_time = g.sample_time;
        Ok(out)
    }
}

/// Roots of the denominator in the `z` plane.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet {
    pub poles: Vec<Complex64>,
}

impl PoleSet {
    pub fn max_modulus(&self) -> f64 {
        self.poles.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// `n` points uniformly covering `[0, pi]`, both ends included.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    std::f64::consts::PI
                } else {
                    std::f64::consts::PI * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}
