//! Frequency-domain stability certificates for the intermittently sampled loop.
//!
//! After the loop transformation the timestamping complement (a memoryless,
//! unit-sector operator) sits in negative feedback with `-T_R`, where
//! `T_R = (1 + J R)^-1 J R` is the complementary sensitivity of the equidistant
//! loop. Two sufficient tests follow, each requiring a Nyquist condition (S1)
//! on `J R` plus a region condition (S2) on `T_R` over `[0, pi]`:
//!
//! * passivity: `Re T_R <= 1` (closed region; uniform stability),
//! * small gain: `|T_R| < 1` (open region; asymptotic stability).
//!
//! The small-gain region is contained in the passivity region, so a small-gain
//! pass implies a passivity pass on the same grid.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lti::{uniform_grid, FrfData, FrfSource, TransferFunction, DEN_ZERO_TOL};
use crate::repetitive::RcConfig;

/// Minimum distance of the loop locus to `-1` for "does not intersect".
pub const NYQUIST_MARGIN: f64 = 1e-6;

/// Numerical allowance on region boundaries. Passivity passes for margins
/// `>= -REGION_TOL`; small gain needs margins `> REGION_TOL`.
pub const REGION_TOL: f64 = 1e-9;

pub const DEFAULT_GRID_SIZE: usize = 1 << 14;

/// Density multiplier of the local refinement pass.
pub const REFINE_FACTOR: usize = 10;

/// Grid points within this distance of a region boundary trigger refinement.
const NEAR_BOUNDARY: f64 = 0.05;

/// Refinement is applied around at most this many local maxima per criterion.
const MAX_REFINED_PEAKS: usize = 512;

/// Within unit distance of the critical point, adjacent locus points may be
/// at most this fraction of their distance to it apart.
const NYQUIST_MAX_REL_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Theorem {
    Passivity,
    SmallGain,
    ClassicSmallGain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NyquistOutcome {
    pub pass: bool,
    /// Net counter-clockwise encirclements of the origin by the return
    /// difference over `[0, 2 pi)`; `None` when the grid cannot resolve the
    /// locus, which counts as a failure.
    pub winding: Option<i64>,
    /// Smallest `|1 + L|` on the grid.
    pub min_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub theorem: Theorem,
    /// `None` when only the region condition was evaluated.
    pub s1_pass: Option<bool>,
    pub s1_winding: Option<i64>,
    pub s2_pass: bool,
    /// Signed distance to the region boundary, positive inside.
    pub s2_margin: f64,
    /// Grid frequencies where the region condition fails.
    pub violation_frequencies: Vec<f64>,
    /// The violating frequencies merged into contiguous grid intervals.
    pub violation_intervals: Vec<(f64, f64)>,
    pub grid_size: usize,
    /// Set when the loop was only certified on measured grid points.
    pub grid_certified_only: bool,
}

impl StabilityReport {
    pub fn pass(&self) -> bool {
        self.s1_pass.unwrap_or(true) && self.s2_pass
    }

    pub fn with_nyquist(mut self, nyq: &NyquistOutcome) -> Self {
        self.s1_pass = Some(nyq.pass);
        self.s1_winding = nyq.winding;
        self
    }
}

/// Builds a report from per-point margins (positive inside the region).
fn region_report(
    theorem: Theorem,
    omegas: &[f64],
    margins: impl Iterator<Item = f64>,
    closed: bool,
) -> StabilityReport {
    let mut worst = f64::INFINITY;
    let mut violating = Vec::new();
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    let mut prev_bad = false;
    for (&w, m) in omegas.iter().zip(margins) {
        worst = worst.min(m);
        let bad = if closed {
            m < -REGION_TOL
        } else {
            m <= REGION_TOL
        };
        if bad {
            violating.push(w);
            match intervals.last_mut() {
                Some(last) if prev_bad => last.1 = w,
                _ => intervals.push((w, w)),
            }
        }
        prev_bad = bad;
    }
    StabilityReport {
        theorem,
        s1_pass: None,
        s1_winding: None,
        s2_pass: violating.is_empty(),
        s2_margin: worst,
        violation_frequencies: violating,
        violation_intervals: intervals,
        grid_size: omegas.len(),
        grid_certified_only: false,
    }
}

/// Region condition of the passivity test: `-T_R` in `Re z >= -1`.
pub fn passivity_check(t_r: &FrfData) -> StabilityReport {
    passivity_check_as(t_r, Theorem::Passivity)
}

pub fn passivity_check_as(t_r: &FrfData, theorem: Theorem) -> StabilityReport {
    region_report(
        theorem,
        t_r.omegas(),
        t_r.values().iter().map(|t| 1.0 - t.re),
        true,
    )
}

/// Region condition of the small-gain test: `T_R` in the open unit disk.
pub fn small_gain_check(t_r: &FrfData) -> StabilityReport {
    region_report(
        Theorem::SmallGain,
        t_r.omegas(),
        t_r.values().iter().map(|t| 1.0 - t.norm()),
        false,
    )
}

/// `sup |(1 - J L) Q| < 1` from responses on a common grid.
pub fn classic_small_gain_from_frf(
    j: &FrfData,
    l: &FrfData,
    q: &FrfData,
) -> Result<StabilityReport> {
    if !j.same_grid(l) || !j.same_grid(q) {
        return Err(Error::GridMismatch);
    }
    let margins = j
        .values()
        .iter()
        .zip(l.values())
        .zip(q.values())
        .map(|((&jv, &lv), &qv)| 1.0 - ((1.0 - jv * lv) * qv).norm());
    Ok(region_report(
        Theorem::ClassicSmallGain,
        j.omegas(),
        margins,
        false,
    ))
}

/// Classic small-gain criterion with `L`, `Q` evaluated on the grid of `j`.
pub fn classic_small_gain(
    j: &FrfData,
    l: &TransferFunction,
    q: &TransferFunction,
) -> Result<StabilityReport> {
    let lf = l.freq_response(j.omegas())?;
    let qf = q.freq_response(j.omegas())?;
    classic_small_gain_from_frf(j, &lf, &qf)
}

/// Nyquist test on an open-loop response `L(e^{jw})` over `[0, pi]`, extended
/// to `[0, 2 pi)` by conjugate symmetry.
pub fn nyquist_check(loop_frf: &FrfData) -> Result<NyquistOutcome> {
    let ones = vec![Complex64::new(1.0, 0.0); loop_frf.len()];
    nyquist_check_factored(loop_frf.omegas(), loop_frf.values(), &ones)
}

/// Nyquist test for a loop given as `num / den` pointwise, so that open-loop
/// poles on the unit circle (`den = 0`) are allowed.
///
/// The winding is taken of `chi = den + num`, the return difference scaled by
/// `den`. When `den` is the denominator of an internal model and the rest of
/// the loop is stable, the zeros of `chi` outside the unit disk are exactly the
/// unstable closed-loop poles, and each one adds `-1` to the winding.
pub fn nyquist_check_factored(
    omegas: &[f64],
    num: &[Complex64],
    den: &[Complex64],
) -> Result<NyquistOutcome> {
    if omegas.len() != num.len() || omegas.len() != den.len() {
        return Err(Error::GridMismatch);
    }
    if omegas.is_empty() {
        return Err(Error::InvalidFrf("empty frequency grid".into()));
    }
    let chi: Vec<Complex64> = num.iter().zip(den).map(|(&n, &d)| d + n).collect();
    let distance: Vec<f64> = chi
        .iter()
        .zip(den)
        .map(|(c, d)| {
            if d.norm() == 0.0 {
                f64::INFINITY
            } else {
                c.norm() / d.norm()
            }
        })
        .collect();
    let min_distance = distance.iter().copied().fold(f64::INFINITY, f64::min);

    // closed contour: w from 0 to pi, then the conjugate branch back to 0
    let mut contour: Vec<(f64, Complex64, Option<Complex64>)> = Vec::with_capacity(2 * chi.len());
    for (i, (&c, &d)) in chi.iter().zip(den).enumerate() {
        let rel = (d.norm() > 0.0).then(|| c / d);
        contour.push((omegas[i], c, rel));
    }
    for i in (0..chi.len()).rev() {
        let (w, c, rel) = contour[i];
        contour.push((w, c.conj(), rel.map(|r| r.conj())));
    }

    let intersects = min_distance <= NYQUIST_MARGIN;
    let mut total = 0.0;
    for pos in 0..contour.len() {
        let (w, a, ra) = contour[pos];
        let (_, b, rb) = contour[(pos + 1) % contour.len()];
        if a.norm() == 0.0 || b.norm() == 0.0 {
            continue;
        }
        let step = (b / a).arg();
        if !intersects {
            let coarse_near_critical = match (ra, rb) {
                (Some(ra), Some(rb)) => {
                    let near = ra.norm().min(rb.norm());
                    near < 1.0 && (rb - ra).norm() > NYQUIST_MAX_REL_STEP * near
                }
                _ => false,
            };
            if step.abs() > PI / 2.0 || coarse_near_critical {
                return Err(Error::GridTooCoarse { omega: w });
            }
        }
        total += step;
    }
    let winding = (total / (2.0 * PI)).round() as i64;
    Ok(NyquistOutcome {
        pass: winding == 0 && !intersects,
        winding: Some(winding),
        min_distance,
    })
}

/// `T_R` and `S_R` as transfer functions.
pub fn build_t_r(
    j: &TransferFunction,
    r: &TransferFunction,
) -> Result<(TransferFunction, TransferFunction)> {
    Ok((
        TransferFunction::feedback(j, r)?,
        TransferFunction::sensitivity(j, r)?,
    ))
}

/// `T_R` and `S_R` pointwise from a plant response and a parametric
/// controller, evaluated without forming `R` so unit-circle poles of `R` are
/// harmless.
pub fn build_t_r_frf(j: &FrfData, r: &TransferFunction) -> Result<(FrfData, FrfData)> {
    let mut t = Vec::with_capacity(j.len());
    let mut s = Vec::with_capacity(j.len());
    for (w, jv) in j.iter() {
        let (tv, sv) = closed_loop_point(w, jv, r)?;
        t.push(tv);
        s.push(sv);
    }
    Ok((
        FrfData::new(j.omegas().to_vec(), t, j.source())?,
        FrfData::new(j.omegas().to_vec(), s, j.source())?,
    ))
}

fn closed_loop_point(
    w: f64,
    jv: Complex64,
    r: &TransferFunction,
) -> Result<(Complex64, Complex64)> {
    let (rn, rd) = r.eval_parts(w);
    let jn = jv * rn;
    let chi = rd + jn;
    if chi.norm() < DEN_ZERO_TOL * (1.0 + rd.norm()) {
        return Err(Error::SingularReturnDifference { omega: w });
    }
    Ok((jn / chi, rd / chi))
}

/// Complementary sensitivity of the classic controller in closed form,
/// `alpha J L Q z^-N / (1 - (1 - alpha J L) Q z^-N)`.
pub fn classic_t_r_point(jv: Complex64, cfg: &RcConfig, w: f64) -> Result<Complex64> {
    let l = cfg.alpha() * cfg.learning().eval(w)?;
    let q = cfg.robustness().eval(w)?;
    let buffer = Complex64::from_polar(1.0, -w * cfg.buffer_len() as f64);
    let jl = jv * l;
    let den = 1.0 - (1.0 - jl) * q * buffer;
    if den.norm() < DEN_ZERO_TOL {
        return Err(Error::SingularReturnDifference { omega: w });
    }
    Ok(jl * q * buffer / den)
}

pub fn classic_t_r_frf(j: &FrfData, cfg: &RcConfig) -> Result<FrfData> {
    let values = j
        .iter()
        .map(|(w, jv)| classic_t_r_point(jv, cfg, w))
        .collect::<Result<Vec<_>>>()?;
    FrfData::new(j.omegas().to_vec(), values, j.source())
}

/// Plant knowledge available to the checks.
#[derive(Debug, Clone, PartialEq)]
pub enum PlantResponse {
    Model(TransferFunction),
    Measured(FrfData),
}

impl PlantResponse {
    pub fn is_measured(&self) -> bool {
        matches!(self, Self::Measured(_))
    }
}

/// Samples `eval` on a uniform grid of `size` points and refines once, at
/// `REFINE_FACTOR` times the density, around local maxima of each criterion
/// that come within `NEAR_BOUNDARY` of the boundary value 1.
pub fn refined_response(
    size: usize,
    eval: impl Fn(f64) -> Result<Complex64>,
    criteria: &[&dyn Fn(Complex64) -> f64],
) -> Result<FrfData> {
    let base = uniform_grid(size.max(2));
    let values = base.iter().map(|&w| eval(w)).collect::<Result<Vec<_>>>()?;
    let mut peaks: Vec<usize> = Vec::new();
    for crit in criteria {
        let c: Vec<f64> = values.iter().map(|&v| crit(v)).collect();
        let global = (0..c.len())
            .max_by(|&a, &b| c[a].total_cmp(&c[b]))
            .expect("non-empty grid");
        let mut local: Vec<usize> = (0..c.len())
            .filter(|&i| {
                let left = i == 0 || c[i] >= c[i - 1];
                let right = i + 1 == c.len() || c[i] >= c[i + 1];
                left && right && c[i] >= 1.0 - NEAR_BOUNDARY
            })
            .collect();
        local.sort_by(|&a, &b| c[b].total_cmp(&c[a]));
        local.truncate(MAX_REFINED_PEAKS);
        peaks.push(global);
        peaks.extend(local);
    }
    peaks.sort_unstable();
    peaks.dedup();

    let mut extra = Vec::new();
    let h = base[1] - base[0];
    for &i in &peaks {
        for side in [-1.0, 1.0] {
            for s in 1..REFINE_FACTOR {
                let w = base[i] + side * h * s as f64 / REFINE_FACTOR as f64;
                if (0.0..=PI).contains(&w) {
                    extra.push(w);
                }
            }
        }
    }
    extra.sort_by(f64::total_cmp);
    extra.dedup();

    let mut points: Vec<(f64, Complex64)> = base.into_iter().zip(values).collect();
    for w in extra {
        points.push((w, eval(w)?));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    points.dedup_by(|a, b| a.0 == b.0);
    let (omegas, values) = points.into_iter().unzip();
    FrfData::new(omegas, values, FrfSource::Model)
}

/// Everything the two theorems need for one loop `J R`.
#[derive(Debug, Clone)]
pub struct LoopVerification {
    pub t_r: FrfData,
    pub nyquist: NyquistOutcome,
    pub passivity: StabilityReport,
    pub small_gain: StabilityReport,
    /// Lowest frequency where `|J R|` crosses one.
    pub crossover: Option<f64>,
}

/// Runs S1 and both region conditions for controller `r` around `plant`.
///
/// Model plants are sampled on a refined grid, doubled in size until the
/// Nyquist locus is resolved (at most [`MAX_MODEL_GRID`] base points); measured
/// plants are checked on their own grid only and the reports are flagged
/// accordingly.
pub fn verify_loop(
    plant: &PlantResponse,
    r: &TransferFunction,
    grid_size: usize,
) -> Result<LoopVerification> {
    match plant {
        PlantResponse::Model(tf) => {
            let mut size = grid_size.max(2);
            loop {
                let t_eval = |w: f64| -> Result<Complex64> {
                    let jv = tf.eval(w)?;
                    Ok(closed_loop_point(w, jv, r)?.0)
                };
                let re = |t: Complex64| t.re;
                let abs = |t: Complex64| t.norm();
                let grid = refined_response(size, t_eval, &[&re, &abs])?;
                let j = tf.freq_response(grid.omegas())?;
                let last = size >= MAX_MODEL_GRID;
                match verify_on_grid(&j, r, false, last) {
                    Err(Error::GridTooCoarse { .. }) => {
                        size = (2 * size - 1).min(MAX_MODEL_GRID);
                    }
                    other => return other,
                }
            }
        }
        PlantResponse::Measured(frf) => verify_on_grid(frf, r, true, true),
    }
}

/// Largest base grid tried for model plants.
pub const MAX_MODEL_GRID: usize = (1 << 21) + 1;

/// With `accept_unresolved`, a locus the grid cannot resolve yields a failed
/// S1 instead of [`Error::GridTooCoarse`].
fn verify_on_grid(
    j: &FrfData,
    r: &TransferFunction,
    measured: bool,
    accept_unresolved: bool,
) -> Result<LoopVerification> {
    let (t_r, _) = build_t_r_frf(j, r)?;

    let mut num = Vec::with_capacity(j.len());
    let mut den = Vec::with_capacity(j.len());
    let mut gain = Vec::with_capacity(j.len());
    for (w, jv) in j.iter() {
        let (rn, rd) = r.eval_parts(w);
        num.push(jv * rn);
        den.push(rd);
        gain.push(if rd.norm() == 0.0 {
            f64::INFINITY
        } else {
            (jv * rn / rd).norm()
        });
    }
    let nyquist = match nyquist_check_factored(j.omegas(), &num, &den) {
        Err(Error::GridTooCoarse { .. }) if accept_unresolved => NyquistOutcome {
            pass: false,
            winding: None,
            min_distance: num
                .iter()
                .zip(&den)
                .filter(|(_, d)| d.norm() > 0.0)
                .map(|(&n, &d)| (1.0 + n / d).norm())
                .fold(f64::INFINITY, f64::min),
        },
        other => other?,
    };
    let mut passivity = passivity_check(&t_r).with_nyquist(&nyquist);
    let mut small_gain = small_gain_check(&t_r).with_nyquist(&nyquist);
    passivity.grid_certified_only = measured;
    small_gain.grid_certified_only = measured;
    Ok(LoopVerification {
        crossover: crossover(j.omegas(), &gain),
        t_r,
        nyquist,
        passivity,
        small_gain,
    })
}

/// First crossing of `gain` through one, linearly interpolated between grid
/// points.
pub fn crossover(omegas: &[f64], gain: &[f64]) -> Option<f64> {
    for i in 0..gain.len().saturating_sub(1) {
        let (a, b) = (gain[i] - 1.0, gain[i + 1] - 1.0);
        if a == 0.0 {
            return Some(omegas[i]);
        }
        if a.signum() != b.signum() || b == 0.0 {
            if !a.is_finite() || !b.is_finite() {
                return Some(if a.is_finite() {
                    omegas[i]
                } else {
                    omegas[i + 1]
                });
            }
            let t = a / (a - b);
            return Some(omegas[i] + t * (omegas[i + 1] - omegas[i]));
        }
    }
    None
}
