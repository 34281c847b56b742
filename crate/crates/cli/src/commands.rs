use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use isrc_core::design::{evaluate_design, run_design, DesignOutcome, DesignStatus};
use isrc_core::repetitive::{basis_rc_transfer, BasisRcConfig, RcConfig};
use isrc_core::sim::{
    cumulative_amplitude_spectrum, run_closed_loop, Controller, Metrics, Scenario, SimResult,
};
use isrc_core::stability::{verify_loop, NyquistOutcome, PlantResponse, StabilityReport};
use isrc_core::timestamping::TimestampGenerator;
use isrc_core::Error as CoreError;

use crate::config::{self, ControllerConfig, Loaded, ResolvedController};
use crate::CommonArgs;

pub enum Status {
    Pass,
    Fail(String),
}

fn load(args: &CommonArgs) -> Result<Loaded> {
    let mut loaded = config::load(&args.config)?;
    if let Some(g) = args.grid_size {
        if g < 2 {
            bail!("--grid-size must be at least 2");
        }
        loaded.config.grid_size = Some(g);
    }
    Ok(loaded)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Design failures that are outcomes rather than input errors.
fn design_failure(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NominalDesignInfeasible(_) | CoreError::DesignExhausted { .. }
    )
}

fn write_design(dir: &Path, outcome: &DesignOutcome) -> Result<()> {
    write(dir, "design_outcome.json", &json(outcome)?)?;
    write(dir, "design_iterations.csv", &outcome.iterations_csv())
}

pub fn design(args: &CommonArgs) -> Result<Status> {
    let loaded = load(args)?;
    let spec = loaded.design_spec()?;
    match run_design(&spec) {
        Ok(outcome) => {
            write_design(&args.out, &outcome)?;
            Ok(match outcome.status {
                DesignStatus::Success => Status::Pass,
                DesignStatus::Exhausted => Status::Fail(format!(
                    "design exhausted after {} iterations without satisfying the passivity test",
                    outcome.iterations.len() - 1
                )),
            })
        }
        Err(e) if design_failure(&e) => Ok(Status::Fail(e.to_string())),
        Err(e) => Err(e.into()),
    }
}

/// The configured controller; `designed` runs the design section.
fn resolve_controller(loaded: &Loaded) -> Result<std::result::Result<ResolvedController, String>> {
    let Some(c) = &loaded.config.controller else {
        bail!("config has no controller section");
    };
    Ok(Ok(match c {
        ControllerConfig::Classic {
            buffer_len,
            learning,
            robustness,
            alpha,
        } => ResolvedController::Classic(RcConfig::new(
            *buffer_len,
            learning.clone(),
            robustness.clone(),
            *alpha,
        )?),
        ControllerConfig::Basis { frequencies, gains } => {
            ResolvedController::Basis(BasisRcConfig::new(frequencies.clone(), gains.clone())?)
        }
        ControllerConfig::MatchedBasis { frequencies, gain } => ResolvedController::Basis(
            BasisRcConfig::matched(&loaded.config.plant, frequencies.clone(), *gain)?,
        ),
        ControllerConfig::Designed => {
            let spec = loaded.design_spec()?;
            match run_design(&spec) {
                Ok(o) if o.status == DesignStatus::Success => ResolvedController::Classic(o.cfg),
                Ok(o) => {
                    return Ok(Err(format!(
                        "design exhausted after {} iterations",
                        o.iterations.len() - 1
                    )))
                }
                Err(e) if design_failure(&e) => return Ok(Err(e.to_string())),
                Err(e) => return Err(e.into()),
            }
        }
    }))
}

#[derive(Debug, Serialize)]
struct LoopReport {
    /// Classic small-gain test; classic controllers only.
    classic_small_gain: Option<StabilityReport>,
    passivity: StabilityReport,
    small_gain: StabilityReport,
    nyquist: NyquistOutcome,
    crossover: Option<f64>,
}

#[derive(Debug, Serialize)]
struct VerifyReport {
    controller: ResolvedController,
    passivity_pass: bool,
    small_gain_pass: bool,
    model: LoopReport,
    measured: Option<LoopReport>,
}

fn loop_report(
    controller: &ResolvedController,
    plant: &PlantResponse,
    grid_size: usize,
) -> Result<LoopReport> {
    Ok(match controller {
        ResolvedController::Classic(cfg) => {
            let r = evaluate_design(cfg, plant, grid_size)?;
            LoopReport {
                classic_small_gain: Some(r.classic_small_gain),
                passivity: r.passivity,
                small_gain: r.small_gain,
                nyquist: r.nyquist,
                crossover: r.crossover,
            }
        }
        ResolvedController::Basis(cfg) => {
            let v = verify_loop(plant, &basis_rc_transfer(cfg)?, grid_size)?;
            LoopReport {
                classic_small_gain: None,
                passivity: v.passivity,
                small_gain: v.small_gain,
                nyquist: v.nyquist,
                crossover: v.crossover,
            }
        }
    })
}

pub fn verify(args: &CommonArgs) -> Result<Status> {
    let loaded = load(args)?;
    let controller = match resolve_controller(&loaded)? {
        Ok(c) => c,
        Err(msg) => return Ok(Status::Fail(msg)),
    };
    let grid = loaded.grid_size();
    let model = loop_report(
        &controller,
        &PlantResponse::Model(loaded.config.plant.clone()),
        grid,
    )?;
    let measured = loaded
        .measured
        .as_ref()
        .map(|m| loop_report(&controller, &PlantResponse::Measured(m.clone()), grid))
        .transpose()?;
    let reports = std::iter::once(&model).chain(measured.as_ref());
    let (mut t1, mut t2) = (true, true);
    for r in reports {
        t1 &= r.passivity.pass();
        t2 &= r.small_gain.pass();
    }
    let report = VerifyReport {
        controller,
        passivity_pass: t1,
        small_gain_pass: t2,
        model,
        measured,
    };
    write(&args.out, "verify_report.json", &json(&report)?)?;
    Ok(if t1 {
        Status::Pass
    } else {
        Status::Fail("passivity test failed".into())
    })
}

fn scenario(
    loaded: &Loaded,
    controller: &ResolvedController,
    seed: Option<u64>,
) -> Result<Scenario> {
    let Some(s) = &loaded.config.scenario else {
        bail!("config has no scenario section");
    };
    let scn = Scenario {
        plant: s
            .plant
            .clone()
            .unwrap_or_else(|| loaded.config.plant.clone()),
        disturbance: s.disturbance.clone(),
        controller: match controller {
            ResolvedController::Classic(c) => Controller::Classic(c.clone()),
            ResolvedController::Basis(c) => Controller::Basis(c.clone()),
        },
        timestamps: s.timestamps.clone(),
        horizon: s.horizon,
        seed: seed.unwrap_or(s.seed),
    };
    scn.validate()?;
    Ok(scn)
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    horizon: usize,
    samples: usize,
    stamps: usize,
    seed: u64,
    diverged_at: Option<usize>,
    metrics: Option<&'a Metrics>,
}

fn summary<'a>(scn: &Scenario, r: &'a SimResult) -> RunSummary<'a> {
    RunSummary {
        horizon: scn.horizon,
        samples: r.e.len(),
        stamps: r.psi.len(),
        seed: scn.seed,
        diverged_at: r.diverged_at,
        metrics: r.metrics.as_ref(),
    }
}

pub fn simulate(args: &CommonArgs) -> Result<Status> {
    let loaded = load(args)?;
    let controller = match resolve_controller(&loaded)? {
        Ok(c) => c,
        Err(msg) => return Ok(Status::Fail(msg)),
    };
    let scn = scenario(&loaded, &controller, args.seed)?;
    let result = run_closed_loop(&scn)?;
    write(&args.out, "simulation.csv", &result.to_csv())?;
    write(&args.out, "metrics.json", &json(&summary(&scn, &result))?)?;
    // spectrum of the second half of the run
    let tail = &result.e[result.e.len() / 2..];
    if tail.len() >= 2 {
        let spectrum = cumulative_amplitude_spectrum(tail)?;
        write(
            &args.out,
            "spectrum.csv",
            &spectrum.to_csv(scn.plant.sample_time()),
        )?;
    }
    Ok(match result.diverged_at {
        Some(k) => Status::Fail(format!("run diverged at sample {k}")),
        None => Status::Pass,
    })
}

struct SweepRun {
    seed: u64,
    p: Option<f64>,
    alpha: Option<f64>,
}

pub fn sweep(args: &CommonArgs) -> Result<Status> {
    let loaded = load(args)?;
    let Some(sw) = &loaded.config.sweep else {
        bail!("config has no sweep section");
    };
    if sw.seeds.is_empty() {
        bail!("sweep needs at least one seed");
    }
    let controller = match resolve_controller(&loaded)? {
        Ok(c) => c,
        Err(msg) => return Ok(Status::Fail(msg)),
    };
    if sw.alpha.is_some() && !matches!(controller, ResolvedController::Classic(_)) {
        bail!("an alpha sweep needs a classic controller");
    }
    let ps: Vec<Option<f64>> = match &sw.p {
        Some(v) => v.iter().map(|&p| Some(p)).collect(),
        None => vec![None],
    };
    let alphas: Vec<Option<f64>> = match &sw.alpha {
        Some(v) => v.iter().map(|&a| Some(a)).collect(),
        None => vec![None],
    };
    let mut runs = Vec::new();
    for &p in &ps {
        for &alpha in &alphas {
            for &seed in &sw.seeds {
                runs.push(SweepRun { seed, p, alpha });
            }
        }
    }
    let base = scenario(&loaded, &controller, None)?;
    let scenarios = runs
        .iter()
        .map(|run| {
            let mut scn = base.clone();
            scn.seed = run.seed;
            if let Some(p) = run.p {
                scn.timestamps = TimestampGenerator::Bernoulli { p, seed: run.seed };
            }
            if let (Some(a), Controller::Classic(cfg)) = (run.alpha, &scn.controller) {
                scn.controller = Controller::Classic(cfg.with_alpha(a)?);
            }
            scn.validate()?;
            Ok(scn)
        })
        .collect::<Result<Vec<_>>>()?;

    let results = scenarios
        .par_iter()
        .enumerate()
        .map(|(i, scn)| -> Result<SimResult> {
            let r = run_closed_loop(scn)?;
            let dir = args.out.join("runs").join(format!("run_{i:04}"));
            write(&dir, "metrics.json", &json(&summary(scn, &r))?)?;
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut csv = String::from(
        "run,seed,p,alpha,initial_rms,converged_rms,reduction_factor,max_abs_error,diverged\n",
    );
    let mut diverged = 0;
    for (i, ((run, scn), r)) in runs.iter().zip(&scenarios).zip(&results).enumerate() {
        let alpha = match &scn.controller {
            Controller::Classic(c) => c.alpha().to_string(),
            Controller::Basis(_) => String::new(),
        };
        let p = run.p.map(|p| p.to_string()).unwrap_or_default();
        let (a, b, c, d) = match &r.metrics {
            Some(m) => (
                m.initial_rms.to_string(),
                m.converged_rms.to_string(),
                m.reduction_factor.to_string(),
                m.max_abs_error.to_string(),
            ),
            None => Default::default(),
        };
        diverged += usize::from(r.diverged());
        let _ = writeln!(
            csv,
            "{i},{},{p},{alpha},{a},{b},{c},{d},{}",
            run.seed,
            u8::from(r.diverged())
        );
    }
    write(&args.out, "sweep.csv", &csv)?;
    Ok(if diverged > 0 {
        Status::Fail(format!("{diverged} of {} runs diverged", runs.len()))
    } else {
        Status::Pass
    })
}
