//! Repetitive controllers.
//!
//! The classic controller is a buffer of length `N` in positive feedback with
//! the robustness filter `Q`, driven through the learning filter `alpha L`:
//!
//! ```text
//! R(z) = alpha L Q z^-N / (1 - Q z^-N)
//! ```
//!
//! `L` and `Q` may preview (`n_L`, `n_Q` samples). The previews are absorbed in
//! the buffer, which is why `N > n_L + n_Q` is required.
//!
//! [`BasisRcConfig`] is a simpler stand-in for basis-function repetitive control:
//! one resonant internal model per disturbance frequency, summed in parallel.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::lti::{FilterState, TransferFunction};
use crate::poly;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRcConfig", into = "RawRcConfig")]
pub struct RcConfig {
    buffer_len: usize,
    learning: TransferFunction,
    robustness: TransferFunction,
    alpha: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRcConfig {
    buffer_len: usize,
    learning: TransferFunction,
    robustness: TransferFunction,
    #[serde(default = "one")]
    alpha: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawRcConfig> for RcConfig {
    type Error = Error;

    fn try_from(raw: RawRcConfig) -> Result<Self> {
        RcConfig::new(raw.buffer_len, raw.learning, raw.robustness, raw.alpha)
    }
}

impl From<RcConfig> for RawRcConfig {
    fn from(cfg: RcConfig) -> Self {
        RawRcConfig {
            buffer_len: cfg.buffer_len,
            learning: cfg.learning,
            robustness: cfg.robustness,
            alpha: cfg.alpha,
        }
    }
}

impl RcConfig {
    pub fn new(
        buffer_len: usize,
        learning: TransferFunction,
        robustness: TransferFunction,
        alpha: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidParameters(format!(
                "learning gain alpha = {alpha} outside [0, 1]"
            )));
        }
        let (n_l, n_q) = (learning.preview(), robustness.preview());
        if buffer_len == 0 || buffer_len <= n_l + n_q {
            return Err(Error::PreviewExceedsBuffer {
                buffer: buffer_len,
                n_l,
                n_q,
            });
        }
        for (name, f) in [("learning", &learning), ("robustness", &robustness)] {
            if !f.is_internally_stable()? {
                return Err(Error::InvalidParameters(format!(
                    "{name} filter is not stable"
                )));
            }
        }
        Ok(Self {
            buffer_len,
            learning,
            robustness,
            alpha,
        })
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer_len
    }

    pub fn learning(&self) -> &TransferFunction {
        &self.learning
    }

    pub fn robustness(&self) -> &TransferFunction {
        &self.robustness
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(
            self.buffer_len,
            self.learning.clone(),
            self.robustness.clone(),
            alpha,
        )
    }

    pub fn with_robustness(&self, robustness: TransferFunction) -> Result<Self> {
        Self::new(
            self.buffer_len,
            self.learning.clone(),
            robustness,
            self.alpha,
        )
    }

    /// Delay between the learning-filter output and the robustness-filter
    /// input once both previews are absorbed.
    fn memory_len(&self) -> usize {
        self.buffer_len - self.learning.preview() - self.robustness.preview()
    }
}

/// `R = alpha L Q z^-N / (1 - Q z^-N)` as a causal transfer function.
///
/// A vanishing numerator gives the zero system: the buffer then never receives
/// input and its modes on the unit circle are never excited.
pub fn rc_transfer(cfg: &RcConfig) -> TransferFunction {
    let (l, q) = (&cfg.learning, &cfg.robustness);
    if cfg.alpha == 0.0 || l.is_zero() || q.is_zero() {
        return TransferFunction::zero();
    }
    let n = cfg.buffer_len;
    let num = poly::shift(
        &poly::scale(&poly::mul(l.num(), q.num()), cfg.alpha),
        n - l.preview() - q.preview(),
    );
    let loop_den = poly::sub(q.den(), &poly::shift(q.num(), n - q.preview()));
    let den = poly::mul(l.den(), &loop_den);
    TransferFunction::new(num, den, 0)
        .and_then(|tf| tf.with_sample_time(l.sample_time()))
        .expect("loop denominator keeps a unit leading coefficient")
}

/// Online state of the classic controller.
///
/// With `a` the controller output and `s = z^-n_L a + alpha z^-n_L L e`, the
/// loop is `a = (z^-n_Q Q) z^-D s` with `D = N - n_L - n_Q >= 1`. The memory
/// ring holds the last `D` values of `s`; `lag` holds the last `n_L` outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RcState {
    memory: VecDeque<f64>,
    lag: VecDeque<f64>,
    learning: FilterState,
    robustness: FilterState,
}

impl RcState {
    pub fn zeros(cfg: &RcConfig) -> Self {
        Self {
            memory: VecDeque::from(vec![0.0; cfg.memory_len()]),
            lag: VecDeque::from(vec![0.0; cfg.learning.preview()]),
            learning: FilterState::new(&cfg.learning),
            robustness: FilterState::new(&cfg.robustness),
        }
    }

    /// Advances one sample with intermittent error `ebar_k` and returns the
    /// controller output `(R ebar)(k)`.
    pub fn step(&mut self, cfg: &RcConfig, ebar_k: f64) -> f64 {
        let (l, q) = (&cfg.learning, &cfg.robustness);
        let learned = cfg.alpha * self.learning.step(l.num(), l.den(), ebar_k);
        let oldest = self.memory.pop_front().expect("memory length >= 1");
        let a = self.robustness.step(q.num(), q.den(), oldest);
        let fed_back = if self.lag.is_empty() {
            a
        } else {
            self.lag.push_back(a);
            self.lag.pop_front().expect("non-empty lag")
        };
        self.memory.push_back(fed_back + learned);
        a
    }

    pub fn is_finite(&self) -> bool {
        self.memory
            .iter()
            .chain(self.lag.iter())
            .all(|v| v.is_finite())
            && self.learning.is_finite()
            && self.robustness.is_finite()
    }
}

/// Functional form of [`RcState::step`].
pub fn rc_step(mut state: RcState, cfg: &RcConfig, ebar_k: f64) -> (RcState, f64) {
    let u = state.step(cfg, ebar_k);
    (state, u)
}

/// Parallel resonant internal models, one per frequency.
///
/// Each frequency `w` with complex gain `c` contributes
///
/// ```text
/// c z^-1 / (1 - e^{jw} z^-1) + conj(c) z^-1 / (1 - e^{-jw} z^-1)
///   = (2 Re(c) z^-1 - 2 Re(c e^{-jw}) z^-2) / (1 - 2 cos(w) z^-1 + z^-2)
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisRcConfig {
    pub frequencies: Vec<f64>,
    pub gains: Vec<Complex64>,
}

impl BasisRcConfig {
    pub fn new(frequencies: Vec<f64>, gains: Vec<Complex64>) -> Result<Self> {
        let cfg = Self { frequencies, gains };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Gains matched to the plant so that `J(e^{jw}) c e^{-jw}` equals the real
    /// learning gain `gain` at every basis frequency.
    pub fn matched(plant: &TransferFunction, frequencies: Vec<f64>, gain: f64) -> Result<Self> {
        let gains = frequencies
            .iter()
            .map(|&w| Ok(gain * Complex64::from_polar(1.0, w) / plant.eval(w)?))
            .collect::<Result<Vec<_>>>()?;
        Self::new(frequencies, gains)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.gains.len() {
            return Err(Error::InvalidParameters(
                "one gain per basis frequency required".into(),
            ));
        }
        for (i, &w) in self.frequencies.iter().enumerate() {
            if !(w > 0.0 && w < std::f64::consts::PI) {
                return Err(Error::InvalidParameters(format!(
                    "basis frequency {w} outside (0, pi)"
                )));
            }
            if self.frequencies[..i].contains(&w) {
                return Err(Error::DuplicateFrequency(w));
            }
        }
        Ok(())
    }
}

pub fn basis_rc_transfer(cfg: &BasisRcConfig) -> Result<TransferFunction> {
    cfg.validate()?;
    let mut total = TransferFunction::zero();
    for (&w, &c) in cfg.frequencies.iter().zip(cfg.gains.iter()) {
        let rotated = c * Complex64::from_polar(1.0, -w);
        let section = TransferFunction::new(
            vec![0.0, 2.0 * c.re, -2.0 * rotated.re],
            vec![1.0, -2.0 * w.cos(), 1.0],
            0,
        )?;
        total = total.add(&section);
    }
    Ok(total)
}
