//! Automated controller design for intermittent sampling.
//!
//! The nominal design inverts the plant model and picks a zero-phase low-pass
//! `Q` so the equidistant loop is stable. It is then tuned for arbitrary
//! timestamp sets: first by scaling the learning gain down, then by notching
//! `Q` where `Re T_R` leaves the passivity region.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lti::{uniform_grid, zero_phase_fir_lowpass, zpetc_inverse, FrfData, TransferFunction};
use crate::repetitive::{rc_transfer, RcConfig};
use crate::stability::{
    classic_small_gain, verify_loop, NyquistOutcome, PlantResponse, StabilityReport,
    DEFAULT_GRID_SIZE,
};

/// Factor applied to the Q cutoff on each nominal retry.
const CUTOFF_RETRY_FACTOR: f64 = 0.8;
const MAX_CUTOFF_RETRIES: usize = 20;

/// Frequency samples used for the notch correction.
const NOTCH_SAMPLES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristics {
    /// Scale `alpha` first; if the schedule runs out, restart at `alpha = 1`
    /// and notch `Q`.
    #[default]
    AlphaThenNotch,
    AlphaOnly,
    NotchOnly,
}

impl Heuristics {
    fn alpha_enabled(self) -> bool {
        matches!(self, Self::AlphaThenNotch | Self::AlphaOnly)
    }

    fn notch_enabled(self) -> bool {
        matches!(self, Self::AlphaThenNotch | Self::NotchOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSpec {
    /// Parametric plant model.
    pub plant: TransferFunction,
    /// Measured response used in addition to the model for verification.
    #[serde(skip)]
    pub measured: Option<FrfData>,
    pub buffer_len: usize,
    pub q_cutoff: f64,
    pub q_half_order: usize,
    #[serde(default = "default_alpha_factor")]
    pub alpha_factor: f64,
    #[serde(default = "default_max_alpha_steps")]
    pub max_alpha_steps: usize,
    #[serde(default)]
    pub heuristics: Heuristics,
    #[serde(default = "default_notch_depth")]
    pub notch_depth: f64,
    #[serde(default = "default_notch_width")]
    pub notch_width: f64,
    #[serde(default = "default_notch_half_order")]
    pub notch_half_order: usize,
    #[serde(default = "default_max_notches")]
    pub max_notch_steps: usize,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

fn default_alpha_factor() -> f64 {
    0.9
}
fn default_max_alpha_steps() -> usize {
    40
}
fn default_notch_depth() -> f64 {
    0.5
}
fn default_notch_width() -> f64 {
    0.1
}
fn default_notch_half_order() -> usize {
    32
}
fn default_max_notches() -> usize {
    10
}
fn default_grid_size() -> usize {
    DEFAULT_GRID_SIZE
}

impl DesignSpec {
    /// Spec with the default schedule and notch settings.
    pub fn new(
        plant: TransferFunction,
        buffer_len: usize,
        q_cutoff: f64,
        q_half_order: usize,
    ) -> Self {
        Self {
            plant,
            measured: None,
            buffer_len,
            q_cutoff,
            q_half_order,
            alpha_factor: default_alpha_factor(),
            max_alpha_steps: default_max_alpha_steps(),
            heuristics: Heuristics::default(),
            notch_depth: default_notch_depth(),
            notch_width: default_notch_width(),
            notch_half_order: default_notch_half_order(),
            max_notch_steps: default_max_notches(),
            grid_size: default_grid_size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        if !(self.alpha_factor > 0.0 && self.alpha_factor < 1.0) {
            return bad(format!("alpha factor {} outside (0, 1)", self.alpha_factor));
        }
        if !(self.notch_depth > 0.0 && self.notch_depth < 1.0) {
            return bad(format!("notch depth {} outside (0, 1)", self.notch_depth));
        }
        if !(self.notch_width > 0.0 && self.notch_width <= PI) {
            return bad(format!("notch width {} outside (0, pi]", self.notch_width));
        }
        if !(self.q_cutoff > 0.0 && self.q_cutoff <= PI) {
            return bad(format!("Q cutoff {} outside (0, pi]", self.q_cutoff));
        }
        if self.grid_size < 2 {
            return bad("grid size must be at least 2".into());
        }
        Ok(())
    }

    fn verification_plants(&self) -> Vec<PlantResponse> {
        let mut plants = vec![PlantResponse::Model(self.plant.clone())];
        if let Some(m) = &self.measured {
            plants.push(PlantResponse::Measured(m.clone()));
        }
        plants
    }
}

/// Checks the plant assumptions: stable and strictly proper.
fn check_plant(plant: &TransferFunction) -> Result<()> {
    let poles = plant.poles()?;
    if poles.max_modulus() >= 1.0 - crate::lti::POLE_EPS {
        return Err(Error::UnstablePlant {
            max_modulus: poles.max_modulus(),
        });
    }
    if !plant.is_strictly_proper() {
        return Err(Error::NotStrictlyProper {
            feedthrough: plant.feedthrough(),
        });
    }
    Ok(())
}

/// Equidistant-sampling design: `L` is the zero-phase inverse of the model and
/// `Q` a zero-phase low-pass whose cutoff is lowered until the classic
/// small-gain condition holds on every verification response.
pub fn design_nominal(spec: &DesignSpec) -> Result<RcConfig> {
    spec.validate()?;
    check_plant(&spec.plant)?;
    let learning = zpetc_inverse(&spec.plant)?;
    let grid = uniform_grid(spec.grid_size);
    let model = spec.plant.freq_response(&grid)?;

    let mut cutoff = spec.q_cutoff;
    let mut worst = f64::NAN;
    for _ in 0..=MAX_CUTOFF_RETRIES {
        let q = zero_phase_fir_lowpass(cutoff, spec.q_half_order)?;
        let mut pass = true;
        for j in std::iter::once(&model).chain(spec.measured.as_ref()) {
            let report = classic_small_gain(j, &learning, &q)?;
            worst = report.s2_margin;
            pass &= report.s2_pass;
        }
        if pass {
            return RcConfig::new(spec.buffer_len, learning, q, 1.0);
        }
        cutoff *= CUTOFF_RETRY_FACTOR;
    }
    Err(Error::NominalDesignInfeasible(format!(
        "small-gain margin {worst:.3e} still negative at cutoff {:.3e} rad/sample",
        cutoff / CUTOFF_RETRY_FACTOR
    )))
}

/// All checks of one controller against one plant response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignReports {
    pub classic_small_gain: StabilityReport,
    pub passivity: StabilityReport,
    pub small_gain: StabilityReport,
    pub nyquist: NyquistOutcome,
    /// Lowest frequency where `|J R|` crosses one.
    pub crossover: Option<f64>,
}

/// Classic small-gain, passivity and small-gain reports for `cfg` around
/// `plant`. Model plants use a uniform grid of `grid_size` points (refined for
/// the theorem checks); measured plants use their own grid.
pub fn evaluate_design(
    cfg: &RcConfig,
    plant: &PlantResponse,
    grid_size: usize,
) -> Result<DesignReports> {
    let j = match plant {
        PlantResponse::Model(tf) => tf.freq_response(&uniform_grid(grid_size))?,
        PlantResponse::Measured(frf) => frf.clone(),
    };
    let classic = classic_small_gain(&j, &cfg.learning().scale(cfg.alpha()), cfg.robustness())?;
    let v = verify_loop(plant, &rc_transfer(cfg), grid_size)?;
    Ok(DesignReports {
        classic_small_gain: classic,
        passivity: v.passivity,
        small_gain: v.small_gain,
        nyquist: v.nyquist,
        crossover: v.crossover,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignStatus {
    Success,
    Exhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub alpha: f64,
    /// Number of notches multiplied into `Q` so far.
    pub notches: usize,
    /// Worst passivity margin over all verification responses.
    pub passivity_margin: f64,
    pub small_gain_margin: f64,
    pub passivity_pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DesignOutcome {
    pub status: DesignStatus,
    pub cfg: RcConfig,
    /// Reports against the model.
    pub model: DesignReports,
    /// Reports against the measured response, when one was supplied.
    pub measured: Option<DesignReports>,
    pub iterations: Vec<IterationRecord>,
}

impl DesignOutcome {
    pub fn iterations_csv(&self) -> String {
        let mut out = String::from("iter,alpha,passivity_margin,small_gain_margin\n");
        for r in &self.iterations {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{:e}",
                r.iter, r.alpha, r.passivity_margin, r.small_gain_margin
            );
        }
        out
    }
}

struct Evaluation {
    reports: Vec<DesignReports>,
    record: IterationRecord,
}

impl Evaluation {
    fn pass(&self) -> bool {
        self.record.passivity_pass
    }

    /// Passivity violation intervals across all responses.
    fn violations(&self) -> Vec<(f64, f64)> {
        self.reports
            .iter()
            .flat_map(|r| r.passivity.violation_intervals.iter().copied())
            .collect()
    }
}

fn evaluate_all(
    cfg: &RcConfig,
    plants: &[PlantResponse],
    grid_size: usize,
    iter: usize,
    notches: usize,
) -> Result<Evaluation> {
    let reports = plants
        .iter()
        .map(|p| evaluate_design(cfg, p, grid_size))
        .collect::<Result<Vec<_>>>()?;
    let min =
        |f: &dyn Fn(&DesignReports) -> f64| reports.iter().map(f).fold(f64::INFINITY, f64::min);
    let record = IterationRecord {
        iter,
        alpha: cfg.alpha(),
        notches,
        passivity_margin: min(&|r| r.passivity.s2_margin),
        small_gain_margin: min(&|r| r.small_gain.s2_margin),
        passivity_pass: reports.iter().all(|r| r.passivity.pass()),
    };
    Ok(Evaluation { reports, record })
}

/// Runs the nominal design followed by the intermittent tuning loop and
/// returns the outcome whether or not the loop succeeded.
pub fn run_design(spec: &DesignSpec) -> Result<DesignOutcome> {
    let nominal = design_nominal(spec)?;
    let plants = spec.verification_plants();
    let mut log = Vec::new();

    let mut cfg = nominal.clone();
    let mut eval = evaluate_all(&cfg, &plants, spec.grid_size, 0, 0)?;
    log.push(eval.record);
    let finish = |status, cfg: RcConfig, eval: Evaluation, log| {
        let mut reports = eval.reports.into_iter();
        Ok(DesignOutcome {
            status,
            cfg,
            model: reports.next().expect("model report"),
            measured: reports.next(),
            iterations: log,
        })
    };
    if eval.pass() {
        return finish(DesignStatus::Success, cfg, eval, log);
    }

    if spec.heuristics.alpha_enabled() {
        let mut alpha = 1.0;
        for _ in 0..spec.max_alpha_steps {
            alpha *= spec.alpha_factor;
            cfg = nominal.with_alpha(alpha)?;
            eval = evaluate_all(&cfg, &plants, spec.grid_size, log.len(), 0)?;
            log.push(eval.record);
            if eval.pass() {
                return finish(DesignStatus::Success, cfg, eval, log);
            }
        }
    }

    if spec.heuristics.notch_enabled() {
        // notching restarts from the full learning gain
        let mut notched = nominal.clone();
        let mut violations = if spec.heuristics.alpha_enabled() {
            evaluate_all(&notched, &plants, spec.grid_size, 0, 0)?.violations()
        } else {
            eval.violations()
        };
        for n in 1..=spec.max_notch_steps {
            let bands = notch_bands(&violations, spec.notch_width);
            let correction = notch_correction(&bands, spec.notch_depth, spec.notch_half_order)?;
            let q = symmetrized(&notched.robustness().mul(&correction))?;
            notched = match notched.with_robustness(q) {
                Ok(c) => c,
                Err(Error::PreviewExceedsBuffer { .. }) => break,
                Err(e) => return Err(e),
            };
            cfg = notched.clone();
            eval = evaluate_all(&cfg, &plants, spec.grid_size, log.len(), n)?;
            log.push(eval.record);
            if eval.pass() {
                return finish(DesignStatus::Success, cfg, eval, log);
            }
            violations = eval.violations();
        }
    }
    finish(DesignStatus::Exhausted, cfg, eval, log)
}

/// Averages mirrored taps of an FIR centred on its preview, removing the
/// rounding asymmetry of a product of symmetric filters.
fn symmetrized(q: &TransferFunction) -> Result<TransferFunction> {
    let taps = q.num();
    if q.den() != [1.0] || taps.len() != 2 * q.preview() + 1 {
        return Ok(q.clone());
    }
    let sym = (0..taps.len())
        .map(|i| 0.5 * (taps[i] + taps[taps.len() - 1 - i]))
        .collect();
    TransferFunction::new(sym, vec![1.0], q.preview())
}

/// Like [`run_design`] but reports an exhausted schedule as an error.
pub fn design_intermittent(spec: &DesignSpec) -> Result<DesignOutcome> {
    let outcome = run_design(spec)?;
    match outcome.status {
        DesignStatus::Success => Ok(outcome),
        DesignStatus::Exhausted => Err(Error::DesignExhausted {
            iterations: outcome.iterations.len() - 1,
        }),
    }
}

/// Notch bands of `width` centred on each violation interval, widened to
/// cover the interval itself and merged where they overlap.
fn notch_bands(violations: &[(f64, f64)], width: f64) -> Vec<(f64, f64)> {
    let mut bands: Vec<(f64, f64)> = violations
        .iter()
        .map(|&(a, b)| {
            let c = 0.5 * (a + b);
            let half = 0.5 * width.max(b - a);
            ((c - half).max(0.0), (c + half).min(PI))
        })
        .collect();
    bands.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for b in bands {
        match merged.last_mut() {
            Some(last) if b.0 <= last.1 => last.1 = last.1.max(b.1),
            _ => merged.push(b),
        }
    }
    merged
}

/// Symmetric FIR approximating gain `depth` on `bands` and one elsewhere, by
/// sampling the desired response and windowing its inverse cosine transform.
/// The centre tap is adjusted so the DC gain is exactly one.
pub fn notch_correction(
    bands: &[(f64, f64)],
    depth: f64,
    half_order: usize,
) -> Result<TransferFunction> {
    let m = half_order;
    let grid = uniform_grid(NOTCH_SAMPLES);
    let desired: Vec<f64> = grid
        .iter()
        .map(|&w| {
            if bands.iter().any(|&(a, b)| w >= a && w <= b) {
                depth
            } else {
                1.0
            }
        })
        .collect();
    let h = PI / (NOTCH_SAMPLES - 1) as f64;
    let mut side: Vec<f64> = (0..=m)
        .map(|n| {
            let integral: f64 = grid
                .iter()
                .zip(&desired)
                .enumerate()
                .map(|(i, (&w, &g))| {
                    let weight = if i == 0 || i + 1 == NOTCH_SAMPLES {
                        0.5
                    } else {
                        1.0
                    };
                    weight * g * (n as f64 * w).cos()
                })
                .sum::<f64>()
                * h
                / PI;
            let window = 0.5 * (1.0 + (PI * n as f64 / (m + 1) as f64).cos());
            integral * window
        })
        .collect();
    let dc = side[0] + 2.0 * side[1..].iter().sum::<f64>();
    side[0] += 1.0 - dc;
    let taps: Vec<f64> = (0..=2 * m).map(|i| side[i.abs_diff(m)]).collect();
    TransferFunction::new(taps, vec![1.0], m)
}
