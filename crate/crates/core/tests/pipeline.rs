use std::f64::consts::PI;

use isrc_core::design::{design_nominal, run_design, DesignSpec, DesignStatus, Heuristics};
use isrc_core::lti::{is_zero_phase_fir, uniform_grid, zpetc_inverse, TransferFunction};
use isrc_core::repetitive::{rc_transfer, BasisRcConfig, RcConfig};
use isrc_core::sim::{run_closed_loop, Controller, Disturbance, Harmonic, Scenario};
use isrc_core::stability::{classic_small_gain, verify_loop, PlantResponse};
use isrc_core::timestamping::TimestampGenerator;

fn plant() -> TransferFunction {
    TransferFunction::new(vec![0.0, 0.2, 0.1], vec![1.0, -1.2, 0.5], 0).unwrap()
}

fn sinusoid(period: f64, amplitude: f64) -> Disturbance {
    Disturbance {
        period,
        harmonics: vec![Harmonic {
            index: None,
            omega: Some(2.0 * PI / period),
            amplitude,
            phase: 0.4,
        }],
    }
}

fn scenario(
    controller: Controller,
    period: f64,
    timestamps: TimestampGenerator,
    periods: usize,
) -> Scenario {
    Scenario {
        plant: plant(),
        disturbance: sinusoid(period, 1.0),
        controller,
        timestamps,
        horizon: (periods as f64 * period).round() as usize,
        seed: 0,
    }
}

#[test]
fn nominal_design_meets_classic_small_gain() {
    let spec = DesignSpec::new(plant(), 64, 1.2, 8);
    let cfg = design_nominal(&spec).unwrap();
    let j = plant().freq_response(&uniform_grid(1 << 14)).unwrap();
    let classic = classic_small_gain(&j, cfg.learning(), cfg.robustness()).unwrap();
    assert!(classic.s2_margin > 0.0, "margin {}", classic.s2_margin);
}

#[test]
fn matched_sinusoid_is_rejected() {
    let l = zpetc_inverse(&plant()).unwrap();
    let cfg = RcConfig::new(40, l, TransferFunction::unity(), 0.8).unwrap();
    let v = verify_loop(&PlantResponse::Model(plant()), &rc_transfer(&cfg), 1 << 12).unwrap();
    assert!(v.passivity.pass());
    let scn = scenario(Controller::Classic(cfg), 40.0, TimestampGenerator::All, 200);
    let res = run_closed_loop(&scn).unwrap();
    let tail = &res.e[res.e.len() - 40..];
    assert!(tail.iter().all(|e| e.abs() < 1e-9));
    assert!(res.metrics.unwrap().reduction_factor >= 1e3);
}

#[test]
fn basis_controller_rejects_non_integer_period() {
    let period = 37.3;
    let cfg = BasisRcConfig::matched(&plant(), vec![2.0 * PI / period], 0.05).unwrap();
    let scn = scenario(
        Controller::Basis(cfg),
        period,
        TimestampGenerator::Bernoulli { p: 0.5, seed: 0 },
        100,
    );
    let m = run_closed_loop(&scn).unwrap().metrics.unwrap();
    assert!(m.harmonics[0].reduction >= 10.0, "{:?}", m.harmonics);
}

#[test]
fn alpha_schedule_decreases_and_lands_in_passivity_region() {
    // the learning filter ignores two samples of plant delay
    let truth = plant().mul(&TransferFunction::delay(2));
    let mut spec = DesignSpec::new(plant(), 200, 1.0, 4);
    spec.heuristics = Heuristics::AlphaOnly;
    spec.measured = Some(truth.freq_response(&uniform_grid(1 << 14)).unwrap());
    let out = run_design(&spec).unwrap();
    assert_eq!(out.status, DesignStatus::Success);
    assert!(out.cfg.alpha() < 1.0);
    assert!(!out.iterations[0].passivity_pass);
    for w in out.iterations.windows(2) {
        assert!(w[1].alpha < w[0].alpha);
    }
    let measured = out.measured.as_ref().unwrap();
    assert!(measured.passivity.pass());
    assert!(measured.passivity.s2_margin >= -1e-9);
}

#[test]
fn notch_only_keeps_q_zero_phase_with_unit_dc() {
    let truth = plant().mul(&TransferFunction::delay(2));
    let mut spec = DesignSpec::new(plant(), 200, 1.0, 4);
    spec.heuristics = Heuristics::NotchOnly;
    spec.measured = Some(truth.freq_response(&uniform_grid(1 << 14)).unwrap());
    let out = run_design(&spec).unwrap();
    assert_eq!(out.cfg.alpha(), 1.0);
    let q = out.cfg.robustness();
    assert!(is_zero_phase_fir(q));
    assert!((q.eval(0.0).unwrap().re - 1.0).abs() < 1e-12);
}

#[test]
fn passing_designs_keep_error_bounded_across_seeds() {
    let l = zpetc_inverse(&plant()).unwrap();
    let gamma = TransferFunction::gain(1.0 - 1e-6);
    let t2 = RcConfig::new(30, l.clone(), gamma, 1.0).unwrap();
    let t1 = RcConfig::new(30, l, TransferFunction::unity(), 1.0).unwrap();
    for (cfg, small_gain) in [(t2, true), (t1, false)] {
        let v = verify_loop(&PlantResponse::Model(plant()), &rc_transfer(&cfg), 1 << 12).unwrap();
        assert!(v.passivity.pass());
        assert_eq!(v.small_gain.pass(), small_gain);
        for seed in 0..20 {
            let mut scn = scenario(
                Controller::Classic(cfg.clone()),
                30.0,
                TimestampGenerator::Bernoulli { p: 0.5, seed: 0 },
                60,
            );
            scn.seed = seed;
            let res = run_closed_loop(&scn).unwrap();
            let m = res.metrics.unwrap();
            assert!(m.max_abs_error <= 100.0);
            if small_gain {
                assert!(m.converged_rms <= m.initial_rms);
            }
        }
    }
}
