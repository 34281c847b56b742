//! Closed-loop simulation of the intermittently sampled repetitive control
//! loop, and the error metrics used to judge it.
//!
//! Per sample `k` the plant output is computed first from past inputs, then
//!
//! ```text
//! e(k) = y(k) + v(k),  ebar(k) = e(k) if k in Psi else 0,  u(k) = -(R ebar)(k)
//! ```

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lti::{FilterState, TransferFunction};
use crate::repetitive::{basis_rc_transfer, BasisRcConfig, RcConfig, RcState};
use crate::timestamping::{TimestampGenerator, TimestampSet};

/// Runs stop once `|e|` exceeds this value.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// Disturbance periods of the scenario horizon required at minimum.
const MIN_PERIODS: f64 = 10.0;

/// One sinusoidal component, given either as a harmonic of the disturbance
/// period or as an absolute frequency in rad/sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Harmonic {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    /// Period in samples; may be non-integer.
    pub period: f64,
    pub harmonics: Vec<Harmonic>,
}

impl Disturbance {
    pub fn validate(&self) -> Result<()> {
        if !(self.period.is_finite() && self.period >= 1.0) {
            return Err(Error::InvalidParameters(format!(
                "disturbance period {} must be >= 1",
                self.period
            )));
        }
        for h in &self.harmonics {
            if !(h.amplitude.is_finite() && h.phase.is_finite()) {
                return Err(Error::InvalidParameters(
                    "disturbance amplitude and phase must be finite".into(),
                ));
            }
            match (h.index, h.omega) {
                (Some(_), None) => {}
                (None, Some(w)) if (0.0..=PI).contains(&w) => {}
                (None, Some(w)) => {
                    return Err(Error::InvalidParameters(format!(
                        "disturbance omega {w} outside [0, pi]"
                    )))
                }
                _ => {
                    return Err(Error::InvalidParameters(
                        "each harmonic needs exactly one of index, omega".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Angular frequency of every component in rad/sample.
    pub fn omegas(&self) -> Vec<f64> {
        self.harmonics
            .iter()
            .map(|h| match (h.index, h.omega) {
                (Some(i), _) => 2.0 * PI * i as f64 / self.period,
                (None, Some(w)) => w,
                (None, None) => unreachable!("validated"),
            })
            .collect()
    }

    /// Sum of the component amplitudes, an upper bound of `|v|`.
    pub fn amplitude(&self) -> f64 {
        self.harmonics.iter().map(|h| h.amplitude.abs()).sum()
    }

    pub fn sample(&self, horizon: usize) -> Vec<f64> {
        let omegas = self.omegas();
        (0..horizon)
            .map(|k| {
                self.harmonics
                    .iter()
                    .zip(&omegas)
                    .map(|(h, &w)| h.amplitude * (w * k as f64 + h.phase).sin())
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Controller {
    Classic(RcConfig),
    Basis(BasisRcConfig),
}

enum ControllerState {
    Classic(Box<(RcConfig, RcState)>),
    Basis(TransferFunction, FilterState),
}

impl ControllerState {
    fn new(c: &Controller) -> Result<Self> {
        Ok(match c {
            Controller::Classic(cfg) => Self::Classic(Box::new((cfg.clone(), RcState::zeros(cfg)))),
            Controller::Basis(cfg) => {
                let tf = basis_rc_transfer(cfg)?;
                let state = FilterState::new(&tf);
                Self::Basis(tf, state)
            }
        })
    }

    fn step(&mut self, ebar: f64) -> f64 {
        match self {
            Self::Classic(c) => {
                let (cfg, state) = &mut **c;
                state.step(cfg, ebar)
            }
            Self::Basis(tf, state) => state.step(tf.num(), tf.den(), ebar),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub plant: TransferFunction,
    pub disturbance: Disturbance,
    pub controller: Controller,
    pub timestamps: TimestampGenerator,
    pub horizon: usize,
    /// Replaces the seed of seeded timestamp generators.
    #[serde(default)]
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.disturbance.validate()?;
        self.timestamps.validate()?;
        if (self.horizon as f64) < MIN_PERIODS * self.disturbance.period {
            return Err(Error::HorizonTooShort {
                horizon: self.horizon,
                required: (MIN_PERIODS * self.disturbance.period).ceil() as usize,
            });
        }
        Ok(())
    }

    pub fn timestamp_set(&self) -> Result<TimestampSet> {
        self.timestamps
            .clone()
            .with_seed(self.seed)
            .generate(self.horizon)
    }

    /// Samples per metric window: the disturbance period, rounded.
    pub fn window(&self) -> usize {
        (self.disturbance.period.round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarmonicMetric {
    pub omega: f64,
    pub initial_amplitude: f64,
    pub converged_amplitude: f64,
    /// `initial / converged`.
    pub reduction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub window: usize,
    pub initial_rms: f64,
    pub converged_rms: f64,
    pub reduction_factor: f64,
    pub max_abs_error: f64,
    /// `max |e|` over the last window.
    pub final_max_abs_error: f64,
    pub harmonics: Vec<HarmonicMetric>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub e: Vec<f64>,
    pub ebar: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub v: Vec<f64>,
    pub psi: TimestampSet,
    /// First sample where `|e|` exceeded [`DIVERGENCE_GUARD`]; the sequences
    /// end there.
    pub diverged_at: Option<usize>,
    /// `None` for diverged runs.
    pub metrics: Option<Metrics>,
}

impl SimResult {
    pub fn diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,v,y,e,ebar,u,sampled\n");
        for k in 0..self.e.len() {
            let _ = writeln!(
                out,
                "{k},{},{},{},{},{},{}",
                self.v[k],
                self.y[k],
                self.e[k],
                self.ebar[k],
                self.u[k],
                u8::from(self.psi.contains(k))
            );
        }
        out
    }
}

pub fn run_closed_loop(scn: &Scenario) -> Result<SimResult> {
    scn.validate()?;
    if !scn.plant.is_strictly_proper() {
        return Err(Error::IllPosedLoop(format!(
            "plant feedthrough {} must be zero",
            scn.plant.feedthrough()
        )));
    }
    let psi = scn.timestamp_set()?;
    let mask = psi.mask();
    let v = scn.disturbance.sample(scn.horizon);

    // J = z^-1 J', so y(k) = (J' w)(k) with w(k) = u(k-1)
    let tail_num: Vec<f64> = scn.plant.num().iter().skip(1).copied().collect();
    let den = scn.plant.den();
    let mut plant = FilterState::with_orders(tail_num.len(), den.len());
    let mut controller = ControllerState::new(&scn.controller)?;

    let n = scn.horizon;
    let (mut e, mut ebar, mut u, mut y) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    let mut u_prev = 0.0;
    let mut diverged_at = None;
    for k in 0..n {
        let yk = plant.step(&tail_num, den, u_prev);
        let ek = yk + v[k];
        if ek.is_nan() || ek.abs() > DIVERGENCE_GUARD {
            diverged_at = Some(k);
            break;
        }
        let ebar_k = if mask[k] { ek } else { 0.0 };
        let uk = -controller.step(ebar_k);
        y.push(yk);
        e.push(ek);
        ebar.push(ebar_k);
        u.push(uk);
        u_prev = uk;
    }

    let mut result = SimResult {
        e,
        ebar,
        u,
        y,
        v,
        psi,
        diverged_at,
        metrics: None,
    };
    if let Some(k) = diverged_at {
        result.v.truncate(k);
    } else {
        result.metrics = Some(reduction_metrics(&result, scn, 0)?);
    }
    Ok(result)
}

/// Windowed RMS at every sample; the first `window - 1` samples average over
/// the available prefix.
pub fn rms_moving_window(e: &[f64], window: usize) -> Vec<f64> {
    let w = window.max(1);
    (0..e.len())
        .map(|k| {
            let start = (k + 1).saturating_sub(w);
            let seg = &e[start..=k];
            (seg.iter().map(|x| x * x).sum::<f64>() / seg.len() as f64).sqrt()
        })
        .collect()
}

fn rms(seg: &[f64]) -> f64 {
    if seg.is_empty() {
        return 0.0;
    }
    (seg.iter().map(|x| x * x).sum::<f64>() / seg.len() as f64).sqrt()
}

/// Linear interpolation of values known at the stamps of `psi` onto every
/// sample, held constant before the first and after the last stamp.
pub fn interpolate_to_grid(psi: &TimestampSet, values: &[f64]) -> Result<Vec<f64>> {
    let stamps = psi.stamps();
    if stamps.len() < 2 {
        return Err(Error::TooFewStamps(stamps.len()));
    }
    if values.len() != stamps.len() {
        return Err(Error::LengthMismatch {
            expected: stamps.len(),
            got: values.len(),
        });
    }
    let mut out = Vec::with_capacity(psi.horizon());
    let mut seg = 0;
    for k in 0..psi.horizon() {
        if k <= stamps[0] {
            out.push(values[0]);
            continue;
        }
        if k >= stamps[stamps.len() - 1] {
            out.push(values[values.len() - 1]);
            continue;
        }
        while stamps[seg + 1] < k {
            seg += 1;
        }
        let (k0, k1) = (stamps[seg], stamps[seg + 1]);
        let t = (k - k0) as f64 / (k1 - k0) as f64;
        out.push(values[seg] + t * (values[seg + 1] - values[seg]));
    }
    Ok(out)
}

/// Single-sided amplitude spectrum and its running sum over increasing
/// frequency. Frequencies are in rad/sample.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeSpectrum {
    pub omegas: Vec<f64>,
    pub amplitudes: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl AmplitudeSpectrum {
    /// CSV with frequencies converted to Hz for sample time `ts`.
    pub fn to_csv(&self, ts: f64) -> String {
        let mut out = String::from("omega_hz,amplitude,cumulative\n");
        for i in 0..self.omegas.len() {
            let _ = writeln!(
                out,
                "{},{},{}",
                self.omegas[i] / (2.0 * PI * ts),
                self.amplitudes[i],
                self.cumulative[i]
            );
        }
        out
    }
}

pub fn cumulative_amplitude_spectrum(e: &[f64]) -> Result<AmplitudeSpectrum> {
    let n = e.len();
    if n < 2 {
        return Err(Error::InvalidParameters(
            "spectrum needs at least two samples".into(),
        ));
    }
    let mut buf: Vec<Complex64> = e.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let bins = n / 2 + 1;
    let mut omegas = Vec::with_capacity(bins);
    let mut amplitudes = Vec::with_capacity(bins);
    let mut cumulative = Vec::with_capacity(bins);
    let mut acc = 0.0;
    for (k, x) in buf.iter().take(bins).enumerate() {
        let edge = k == 0 || (n.is_multiple_of(2) && k == n / 2);
        let a = if edge { 1.0 } else { 2.0 } * x.norm() / n as f64;
        acc += a;
        omegas.push(2.0 * PI * k as f64 / n as f64);
        amplitudes.push(a);
        cumulative.push(acc);
    }
    Ok(AmplitudeSpectrum {
        omegas,
        amplitudes,
        cumulative,
    })
}

/// Least-squares amplitude of `a cos(w k) + b sin(w k) + c` over `seg`, with
/// `k` counted from `offset`.
fn fitted_amplitude(seg: &[f64], offset: usize, w: f64) -> f64 {
    if w == 0.0 || (w - PI).abs() < 1e-12 {
        // the sine column vanishes; fit a single cosine
        let col: Vec<f64> = (0..seg.len())
            .map(|i| (w * (offset + i) as f64).cos())
            .collect();
        let num: f64 = col.iter().zip(seg).map(|(c, x)| c * x).sum();
        let den: f64 = col.iter().map(|c| c * c).sum();
        return (num / den).abs();
    }
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (i, &x) in seg.iter().enumerate() {
        let t = w * (offset + i) as f64;
        let row = [t.cos(), t.sin(), 1.0];
        for r in 0..3 {
            atb[r] += row[r] * x;
            for c in 0..3 {
                ata[r][c] += row[r] * row[c];
            }
        }
    }
    let m = nalgebra::Matrix3::from_fn(|r, c| ata[r][c]);
    let b = nalgebra::Vector3::from(atb);
    match m.lu().solve(&b) {
        Some(s) => s[0].hypot(s[1]),
        None => f64::NAN,
    }
}

/// RMS and per-harmonic amplitude of the first window after `settle_periods`
/// windows against the last window of the run.
pub fn reduction_metrics(
    result: &SimResult,
    scn: &Scenario,
    settle_periods: usize,
) -> Result<Metrics> {
    let w = scn.window();
    let n = result.e.len();
    let required = (settle_periods + 2) * w;
    if n < required {
        return Err(Error::HorizonTooShort {
            horizon: n,
            required,
        });
    }
    let first_start = settle_periods * w;
    let first = &result.e[first_start..first_start + w];
    let last_start = n - w;
    let last = &result.e[last_start..];
    let (initial_rms, converged_rms) = (rms(first), rms(last));
    let harmonics = scn
        .disturbance
        .omegas()
        .into_iter()
        .map(|omega| {
            let a0 = fitted_amplitude(first, first_start, omega);
            let a1 = fitted_amplitude(last, last_start, omega);
            HarmonicMetric {
                omega,
                initial_amplitude: a0,
                converged_amplitude: a1,
                reduction: a0 / a1,
            }
        })
        .collect();
    Ok(Metrics {
        window: w,
        initial_rms,
        converged_rms,
        reduction_factor: initial_rms / converged_rms,
        max_abs_error: result.e.iter().fold(0.0, |m, x| m.max(x.abs())),
        final_max_abs_error: last.iter().fold(0.0, |m, x| m.max(x.abs())),
        harmonics,
    })
}
