mod common;

use common::{dft_half, minimum_phase_tf, stable_tf};
use isrc_core::lti::{
    is_zero_phase_fir, uniform_grid, zero_phase_fir_lowpass, zpetc_inverse, FrfData, FrfSource,
    TransferFunction,
};
use isrc_core::repetitive::{rc_transfer, RcConfig, RcState};
use isrc_core::sim::{run_closed_loop, Controller, Disturbance, Harmonic, Scenario};
use isrc_core::stability::{
    classic_small_gain, nyquist_check, passivity_check, small_gain_check, verify_loop,
    PlantResponse,
};
use isrc_core::timestamping::TimestampGenerator;
use num_complex::Complex64;
use proptest::prelude::*;

const FRF_GRID: usize = 4096;

fn rc_design() -> impl Strategy<Value = (TransferFunction, RcConfig)> {
    (
        minimum_phase_tf(),
        0.7f64..1.3,
        0.3f64..3.0,
        0usize..=1,
        prop::sample::select(vec![4usize, 16, 64]),
        0.05f64..=1.0,
    )
        .prop_filter_map("preview too long", |(j, mismatch, cutoff, m, n, alpha)| {
            let l = zpetc_inverse(&j.scale(mismatch)).ok()?;
            let q = zero_phase_fir_lowpass(cutoff, m).ok()?;
            let cfg = RcConfig::new(n, l, q, alpha).ok()?;
            Some((j, cfg))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn freq_response_matches_impulse_dft(tf in stable_tf()) {
        let n = 2 * (FRF_GRID - 1);
        let mut impulse = vec![0.0; n];
        impulse[0] = 1.0;
        let h = dft_half(&tf.simulate(&impulse));
        let frf = tf.freq_response(&uniform_grid(FRF_GRID)).unwrap();
        let scale = frf.values().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in frf.values().iter().zip(&h) {
            prop_assert!((a - b).norm() <= 1e-10 * scale);
        }
    }

    #[test]
    fn fir_simulation_is_convolution(
        taps in prop::collection::vec(-2.0f64..2.0, 1..12),
        x in prop::collection::vec(-5.0f64..5.0, 1..80),
    ) {
        prop_assume!(taps.iter().any(|&t| t != 0.0));
        let y = TransferFunction::fir(taps.clone()).unwrap().simulate(&x);
        for k in 0..x.len() {
            let direct: f64 = (0..taps.len().min(k + 1)).map(|i| taps[i] * x[k - i]).sum();
            prop_assert!((y[k] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn zpetc_is_zero_phase(tf in stable_tf()) {
        let Ok(l) = zpetc_inverse(&tf) else { return Ok(()) };
        for w in uniform_grid(512) {
            let jl = tf.eval(w).unwrap() * l.eval(w).unwrap();
            if jl.norm() > 1e-6 {
                prop_assert!(jl.arg().abs() <= 1e-9, "phase {} at {}", jl.arg(), w);
            }
        }
    }

    #[test]
    fn lowpass_is_symmetric_real_unit_dc(cutoff in 0.01f64..=std::f64::consts::PI, m in 0usize..64) {
        let q = zero_phase_fir_lowpass(cutoff, m).unwrap();
        prop_assert!(is_zero_phase_fir(&q));
        prop_assert!((q.eval(0.0).unwrap().re - 1.0).abs() < 1e-12);
        for w in uniform_grid(64) {
            prop_assert!(q.eval(w).unwrap().im.abs() < 1e-12);
        }
    }

    #[test]
    fn nyquist_agrees_with_closed_loop_poles(g in stable_tf(), k in 0.1f64..6.0) {
        let l = g.scale(k);
        let Ok(out) = nyquist_check(&l.freq_response(&uniform_grid(8192)).unwrap()) else {
            return Ok(());
        };
        prop_assume!(out.min_distance > 1e-3);
        let closed = TransferFunction::feedback(&l, &TransferFunction::unity()).unwrap();
        prop_assert_eq!(out.pass, closed.is_internally_stable().unwrap());
    }

    #[test]
    fn online_controller_matches_transfer((_, cfg) in rc_design(), seed in 0u64..1000) {
        let n = 10 * cfg.buffer_len();
        let input: Vec<f64> = (0..n).map(|k| ((k as u64 * 2654435761 + seed) % 1000) as f64 / 500.0 - 1.0).collect();
        let reference = rc_transfer(&cfg).simulate(&input);
        let mut state = RcState::zeros(&cfg);
        for (k, &x) in input.iter().enumerate() {
            let y = state.step(&cfg, x);
            prop_assert!((y - reference[k]).abs() <= 1e-12 * (1.0 + reference[k].abs()) * n as f64);
        }
    }

    #[test]
    fn alpha_scales_numerator_only((_, cfg) in rc_design(), c in 0.05f64..=1.0) {
        let base = rc_transfer(&cfg);
        let scaled = rc_transfer(&cfg.with_alpha(cfg.alpha() * c).unwrap());
        prop_assert_eq!(base.den(), scaled.den());
        for (a, b) in base.num().iter().zip(scaled.num()) {
            prop_assert!((a * c - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn classic_small_gain_implies_nyquist((j, cfg) in rc_design()) {
        let jf = j.freq_response(&uniform_grid(4096)).unwrap();
        let classic = classic_small_gain(&jf, &cfg.learning().scale(cfg.alpha()), cfg.robustness()).unwrap();
        prop_assume!(classic.s2_pass);
        let v = verify_loop(&PlantResponse::Model(j), &rc_transfer(&cfg), 4096).unwrap();
        prop_assert!(v.nyquist.pass, "winding {:?}", v.nyquist.winding);
    }

    #[test]
    fn small_gain_implies_passivity(values in prop::collection::vec((0.0f64..1.2, -3.2f64..3.2), 2..200)) {
        let omegas = uniform_grid(values.len());
        let values: Vec<Complex64> = values.iter().map(|&(r, t)| Complex64::from_polar(r, t)).collect();
        let frf = FrfData::new(omegas, values, FrfSource::Imported).unwrap();
        if small_gain_check(&frf).s2_pass {
            prop_assert!(passivity_check(&frf).s2_pass);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn loop_identities_and_determinism(p in 0.0f64..=1.0, seed: u64, amp in 0.1f64..10.0) {
        let plant = TransferFunction::new(vec![0.0, 0.2, 0.1], vec![1.0, -1.2, 0.5], 0).unwrap();
        let cfg = RcConfig::new(
            20,
            zpetc_inverse(&plant).unwrap(),
            zero_phase_fir_lowpass(1.5, 4).unwrap(),
            0.5,
        )
        .unwrap();
        let scn = Scenario {
            plant,
            disturbance: Disturbance {
                period: 20.0,
                harmonics: vec![Harmonic { index: Some(1), omega: None, amplitude: amp, phase: 0.3 }],
            },
            controller: Controller::Classic(cfg),
            timestamps: TimestampGenerator::Bernoulli { p, seed: 0 },
            horizon: 400,
            seed,
        };
        let a = run_closed_loop(&scn).unwrap();
        let b = run_closed_loop(&scn).unwrap();
        prop_assert_eq!(a.to_csv(), b.to_csv());
        for k in 0..a.e.len() {
            prop_assert_eq!(a.e[k], a.y[k] + a.v[k]);
            let sampled = a.psi.contains(k);
            prop_assert_eq!(a.ebar[k], if sampled { a.e[k] } else { 0.0 });
        }
    }
}
