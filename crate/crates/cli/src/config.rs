//! Run configuration: one JSON document with a section per command.

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use isrc_core::design::{DesignSpec, Heuristics};
use isrc_core::lti::{FrfData, TransferFunction};
use isrc_core::repetitive::{BasisRcConfig, RcConfig};
use isrc_core::sim::Disturbance;
use isrc_core::timestamping::TimestampGenerator;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Parametric plant model used for design and verification.
    pub plant: TransferFunction,
    /// CSV `omega,re,im` of a measured plant response, relative to the config.
    #[serde(default)]
    pub measured_frf: Option<PathBuf>,
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub design: Option<DesignSection>,
    #[serde(default)]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub scenario: Option<ScenarioSection>,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignSection {
    pub buffer_len: usize,
    pub q_cutoff: f64,
    pub q_half_order: usize,
    #[serde(default)]
    pub alpha_factor: Option<f64>,
    #[serde(default)]
    pub max_alpha_steps: Option<usize>,
    #[serde(default)]
    pub heuristics: Option<Heuristics>,
    #[serde(default)]
    pub notch_depth: Option<f64>,
    #[serde(default)]
    pub notch_width: Option<f64>,
    #[serde(default)]
    pub notch_half_order: Option<usize>,
    #[serde(default)]
    pub max_notch_steps: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    Classic {
        buffer_len: usize,
        learning: TransferFunction,
        robustness: TransferFunction,
        #[serde(default = "one")]
        alpha: f64,
    },
    Basis {
        frequencies: Vec<f64>,
        gains: Vec<Complex64>,
    },
    /// Basis controller with gains matched to the plant model.
    MatchedBasis { frequencies: Vec<f64>, gain: f64 },
    /// The outcome of the `design` section.
    Designed,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    /// Plant in the loop; defaults to the model.
    #[serde(default)]
    pub plant: Option<TransferFunction>,
    pub disturbance: Disturbance,
    pub timestamps: TimestampGenerator,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub seeds: Vec<u64>,
    /// Bernoulli sampling probabilities; keeps the scenario generator if absent.
    #[serde(default)]
    pub p: Option<Vec<f64>>,
    /// Learning gains for classic controllers.
    #[serde(default)]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ResolvedController {
    Classic(RcConfig),
    Basis(BasisRcConfig),
}

/// A parsed config plus the files it refers to.
pub struct Loaded {
    pub config: RunConfig,
    pub measured: Option<FrfData>,
}

pub fn load(path: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))?;
    let measured = match &config.measured_frf {
        Some(rel) => {
            let full = path.parent().unwrap_or(Path::new(".")).join(rel);
            let csv = std::fs::read_to_string(&full)
                .with_context(|| format!("cannot read FRF {}", full.display()))?;
            Some(
                FrfData::from_csv(&csv)
                    .with_context(|| format!("malformed FRF {}", full.display()))?,
            )
        }
        None => None,
    };
    if let Some(s) = &config.scenario {
        s.disturbance.validate()?;
        s.timestamps.validate()?;
    }
    if let Some(g) = config.grid_size {
        if g < 2 {
            bail!("grid_size must be at least 2");
        }
    }
    Ok(Loaded { config, measured })
}

impl Loaded {
    pub fn grid_size(&self) -> usize {
        self.config
            .grid_size
            .unwrap_or(isrc_core::stability::DEFAULT_GRID_SIZE)
    }

    pub fn design_spec(&self) -> Result<DesignSpec> {
        let Some(d) = &self.config.design else {
            bail!("config has no design section");
        };
        let mut spec = DesignSpec::new(
            self.config.plant.clone(),
            d.buffer_len,
            d.q_cutoff,
            d.q_half_order,
        );
        spec.measured = self.measured.clone();
        spec.grid_size = self.grid_size();
        if let Some(v) = d.alpha_factor {
            spec.alpha_factor = v;
        }
        if let Some(v) = d.max_alpha_steps {
            spec.max_alpha_steps = v;
        }
        if let Some(v) = d.heuristics {
            spec.heuristics = v;
        }
        if let Some(v) = d.notch_depth {
            spec.notch_depth = v;
        }
        if let Some(v) = d.notch_width {
            spec.notch_width = v;
        }
        if let Some(v) = d.notch_half_order {
            spec.notch_half_order = v;
        }
        if let Some(v) = d.max_notch_steps {
            spec.max_notch_steps = v;
        }
        spec.validate()?;
        Ok(spec)
    }
}
