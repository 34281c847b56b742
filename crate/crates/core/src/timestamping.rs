//! Timestamp sets, the timestamping operator and its complement.
//!
//! `apply_t` passes the error at the timestamps and zeroes it elsewhere;
//! `apply_t_complement` does the opposite, so the two always sum to the input.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing sample indices, all below `horizon`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TimestampSet {
    stamps: Vec<usize>,
    horizon: usize,
}

impl TimestampSet {
    pub fn new(stamps: Vec<usize>, horizon: usize) -> Result<Self> {
        if stamps.windows(2).any(|p| p[1] <= p[0]) {
            return Err(Error::InvalidParameters(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if let Some(&last) = stamps.last() {
            if last >= horizon {
                return Err(Error::InvalidParameters(format!(
                    "timestamp {last} outside horizon {horizon}"
                )));
            }
        }
        Ok(Self { stamps, horizon })
    }

    pub fn all(horizon: usize) -> Self {
        Self {
            stamps: (0..horizon).collect(),
            horizon,
        }
    }

    pub fn none(horizon: usize) -> Self {
        Self {
            stamps: Vec::new(),
            horizon,
        }
    }

    fn from_mask(mask: &[bool]) -> Self {
        Self {
            stamps: mask
                .iter()
                .enumerate()
                .filter_map(|(k, &m)| m.then_some(k))
                .collect(),
            horizon: mask.len(),
        }
    }

    pub fn stamps(&self) -> &[usize] {
        &self.stamps
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.stamps.binary_search(&k).is_ok()
    }

    /// Membership indicator over `0..horizon`.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.horizon];
        for &k in &self.stamps {
            mask[k] = true;
        }
        mask
    }

    /// CSV with a single column `k`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k\n");
        for k in &self.stamps {
            out.push_str(&k.to_string());
            out.push('\n');
        }
        out
    }

    fn check_len(&self, e: &[f64]) -> Result<()> {
        if e.len() != self.horizon {
            return Err(Error::LengthMismatch {
                expected: self.horizon,
                got: e.len(),
            });
        }
        Ok(())
    }
}

/// Timestamping operator: `e(k)` at `k` in the set, `0` elsewhere.
pub fn apply_t(e: &[f64], psi: &TimestampSet) -> Result<Vec<f64>> {
    psi.check_len(e)?;
    let mut out = vec![0.0; e.len()];
    for &k in psi.stamps() {
        out[k] = e[k];
    }
    Ok(out)
}

/// Complement operator: `0` at `k` in the set, `e(k)` elsewhere.
pub fn apply_t_complement(e: &[f64], psi: &TimestampSet) -> Result<Vec<f64>> {
    psi.check_len(e)?;
    let mut out = e.to_vec();
    for &k in psi.stamps() {
        out[k] = 0.0;
    }
    Ok(out)
}

/// Checks the unit sector conditions of the complement operator as a
/// memoryless map `e -> e~`: `e~ (e~ - e) <= 0` at every sample and `e~ = 0`
/// whenever `e = 0`. Holds for every input and every timestamp set.
pub fn sector_check(e: &[f64], psi: &TimestampSet) -> Result<bool> {
    let tilde = apply_t_complement(e, psi)?;
    Ok(e.iter()
        .zip(tilde.iter())
        .all(|(&w, &phi)| phi * (phi - w) <= 0.0 && (w != 0.0 || phi == 0.0)))
}

/// SplitMix64: a 64-bit generator with a fixed, documented output sequence,
/// used so timestamp realizations are bit-reproducible across platforms.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 bits of resolution.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n`.
    pub fn below(&mut self, n: u64) -> u64 {
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }
}

/// Timestamp realization models. None of them observes the error signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TimestampGenerator {
    All,
    None,
    /// Each sample kept independently with probability `p` (packet loss).
    Bernoulli {
        p: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Samples with `k mod m == offset`.
    Periodic {
        m: usize,
        #[serde(default)]
        offset: usize,
    },
    /// Every `cycle_len` samples, a run of `loss_len` consecutive samples is
    /// dropped at a seeded position within the cycle.
    Burst {
        loss_len: usize,
        cycle_len: usize,
        #[serde(default)]
        seed: u64,
    },
    /// An optical encoder: a stamp whenever the position crosses a line,
    /// i.e. `floor(x(k)/spacing) != floor(x(k-1)/spacing)`.
    Encoder {
        line_spacing: f64,
        trajectory: Vec<f64>,
    },
}

impl TimestampGenerator {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameters(msg));
        match self {
            Self::Bernoulli { p, .. } if !(0.0..=1.0).contains(p) => {
                bad(format!("bernoulli p = {p} outside [0, 1]"))
            }
            Self::Periodic { m, .. } if *m == 0 => bad("periodic m must be >= 1".into()),
            Self::Burst {
                loss_len,
                cycle_len,
                ..
            } if loss_len >= cycle_len => bad(format!(
                "burst loss_len {loss_len} must be below cycle_len {cycle_len}"
            )),
            Self::Encoder {
                line_spacing,
                trajectory,
            } => {
                if !(line_spacing.is_finite() && *line_spacing > 0.0) {
                    bad(format!("encoder line_spacing {line_spacing} must be > 0"))
                } else if trajectory.iter().any(|x| !x.is_finite()) {
                    bad("encoder trajectory must be finite".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Replaces the seed of the seeded kinds.
    pub fn with_seed(mut self, new_seed: u64) -> Self {
        match &mut self {
            Self::Bernoulli { seed, .. } | Self::Burst { seed, .. } => *seed = new_seed,
            _ => {}
        }
        self
    }

    pub fn generate(&self, horizon: usize) -> Result<TimestampSet> {
        self.validate()?;
        if horizon == 0 {
            return Err(Error::InvalidParameters("horizon must be >= 1".into()));
        }
        let set = match self {
            Self::All => TimestampSet::all(horizon),
            Self::None => TimestampSet::none(horizon),
            Self::Bernoulli { p, seed } => {
                let mut rng = SplitMix64::new(*seed);
                let mask: Vec<bool> = (0..horizon).map(|_| rng.next_f64() < *p).collect();
                TimestampSet::from_mask(&mask)
            }
            Self::Periodic { m, offset } => TimestampSet {
                stamps: (0..horizon).filter(|k| k % m == offset % m).collect(),
                horizon,
            },
            Self::Burst {
                loss_len,
                cycle_len,
                seed,
            } => {
                let mut rng = SplitMix64::new(*seed);
                let mut mask = vec![true; horizon];
                let mut start = 0;
                while start < horizon {
                    let at = start + rng.below((cycle_len - loss_len + 1) as u64) as usize;
                    mask[at.min(horizon)..(at + loss_len).min(horizon)].fill(false);
                    start += cycle_len;
                }
                TimestampSet::from_mask(&mask)
            }
            Self::Encoder {
                line_spacing,
                trajectory,
            } => {
                if trajectory.len() < horizon {
                    return Err(Error::InvalidParameters(format!(
                        "encoder trajectory has {} samples, horizon is {horizon}",
                        trajectory.len()
                    )));
                }
                let line = |x: f64| (x / line_spacing).floor();
                TimestampSet {
                    stamps: (1..horizon)
                        .filter(|&k| line(trajectory[k]) != line(trajectory[k - 1]))
                        .collect(),
                    horizon,
                }
            }
        };
        Ok(set)
    }
}
