use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const PLANT: &str = r#"{ "num": [0, 0.2, 0.1], "den": [1, -1.2, 0.5] }"#;

/// Exact inverse of `PLANT`, one sample of preview.
const INVERSE: &str = r#"{ "num": [5, -6, 2.5], "den": [1, 0.5], "preview": 1 }"#;

struct Run {
    code: i32,
    stderr: String,
    out: PathBuf,
    _dir: TempDir,
}

impl Run {
    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.out.join(name)).unwrap()
    }

    fn json(&self, name: &str) -> Value {
        serde_json::from_str(&self.read(name)).unwrap()
    }
}

fn run(cmd: &str, config: &str, files: &[(&str, &str)], extra: &[&str]) -> Run {
    let dir = tempfile::tempdir().unwrap();
    for (name, contents) in files {
        fs::write(dir.path().join(name), contents).unwrap();
    }
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_isrc"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: output.status.code().unwrap(),
        stderr: String::from_utf8(output.stderr).unwrap(),
        out,
        _dir: dir,
    }
}

fn classic(q: &str, learning: &str, alpha: f64, buffer: usize) -> String {
    format!(
        r#"{{ "type": "classic", "buffer_len": {buffer}, "learning": {learning}, "robustness": {q}, "alpha": {alpha} }}"#
    )
}

fn scenario(period: usize, amplitude: f64, timestamps: &str, periods: usize) -> String {
    format!(
        r#"{{ "disturbance": {{ "period": {period}, "harmonics": [ {{ "index": 1, "amplitude": {amplitude} }}, {{ "index": 2, "amplitude": {half}, "phase": 0.4 }} ] }},
             "timestamps": {timestamps}, "horizon": {horizon} }}"#,
        half = amplitude / 2.0,
        horizon = period * periods
    )
}

fn csv_column(text: &str, name: &str) -> Vec<String> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

#[test]
fn design_succeeds_and_writes_outputs() {
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "grid_size": 4096,
             "design": {{ "buffer_len": 40, "q_cutoff": 1.0, "q_half_order": 4 }} }}"#
    );
    let r = run("design", &cfg, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json("design_outcome.json")["status"], "success");
    let log = r.read("design_iterations.csv");
    assert!(log.starts_with("iter,alpha,passivity_margin,small_gain_margin\n"));
}

#[test]
fn unstable_plant_is_invalid_input() {
    let cfg = r#"{ "plant": { "num": [0, 1], "den": [1, -2] },
                   "design": { "buffer_len": 40, "q_cutoff": 1.0, "q_half_order": 4 } }"#;
    let r = run("design", cfg, &[], &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("not internally stable"), "{}", r.stderr);
}

#[test]
fn exhausted_schedule_logs_every_step() {
    // the low-pass overshoots unit gain, which no learning gain can repair
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "grid_size": 4096,
             "design": {{ "buffer_len": 40, "q_cutoff": 1.2, "q_half_order": 6,
                          "heuristics": "alpha_only", "max_alpha_steps": 12 }} }}"#
    );
    let r = run("design", &cfg, &[], &[]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("exhausted"));
    let log = r.read("design_iterations.csv");
    let alphas = csv_column(&log, "alpha");
    assert_eq!(alphas.len(), 13);
    let alphas: Vec<f64> = alphas.iter().map(|a| a.parse().unwrap()).collect();
    assert!(alphas.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(r.json("design_outcome.json")["status"], "exhausted");
}

#[test]
fn boundary_design_passes_passivity_only() {
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "controller": {} }}"#,
        classic(r#"{ "num": [1] }"#, INVERSE, 1.0, 50)
    );
    let r = run("verify", &cfg, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.json("verify_report.json");
    assert_eq!(report["passivity_pass"], true);
    assert_eq!(report["small_gain_pass"], false);
    assert_eq!(report["model"]["small_gain"]["s2_pass"], false);
}

#[test]
fn verify_with_measured_response() {
    let mut frf = String::from("omega,re,im\n");
    for i in 0..2048 {
        let w = std::f64::consts::PI * i as f64 / 2047.0;
        let (c, s) = (w.cos(), w.sin());
        // J = 0.5 z^-1
        frf.push_str(&format!("{w},{},{}\n", 0.5 * c, -0.5 * s));
    }
    let cfg = format!(
        r#"{{ "plant": {{ "num": [0, 0.5] }}, "measured_frf": "frf.csv",
             "controller": {} }}"#,
        classic(
            r#"{ "num": [0.9] }"#,
            r#"{ "num": [2], "preview": 1 }"#,
            0.5,
            16
        )
    );
    let r = run("verify", &cfg, &[("frf.csv", &frf)], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let report = r.json("verify_report.json");
    assert_eq!(report["measured"]["passivity"]["grid_certified_only"], true);
    assert_eq!(report["small_gain_pass"], true);
}

#[test]
fn non_monotone_frf_is_invalid_input() {
    let frf = "omega,re,im\n0,1,0\n0.5,0.9,0.1\n0.4,0.8,0.2\n";
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "measured_frf": "frf.csv",
             "controller": {} }}"#,
        classic(r#"{ "num": [1] }"#, INVERSE, 1.0, 50)
    );
    let r = run("verify", &cfg, &[("frf.csv", frf)], &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("increasing"), "{}", r.stderr);
}

#[test]
fn malformed_config_is_invalid_input() {
    let r = run(
        "verify",
        r#"{ "plant": { "num": [0, 1] }, "bogus": 1 }"#,
        &[],
        &[],
    );
    assert_eq!(r.code, 2);
    let r = run("simulate", &format!(r#"{{ "plant": {PLANT} }}"#), &[], &[]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("controller"), "{}", r.stderr);
}

#[test]
fn zero_disturbance_gives_zero_series() {
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "controller": {}, "scenario": {} }}"#,
        classic(r#"{ "num": [1] }"#, INVERSE, 1.0, 20),
        scenario(20, 0.0, r#"{ "kind": "bernoulli", "p": 0.5 }"#, 20)
    );
    let r = run("simulate", &cfg, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let sim = r.read("simulation.csv");
    assert_eq!(sim.lines().count(), 401);
    for col in ["v", "y", "e", "ebar", "u"] {
        assert!(csv_column(&sim, col)
            .iter()
            .all(|x| x.parse::<f64>().unwrap() == 0.0));
    }
    assert!(r.out.join("spectrum.csv").exists());
}

#[test]
fn small_gain_design_sweep_never_amplifies() {
    let seeds: Vec<String> = (0..20).map(|s| s.to_string()).collect();
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "controller": {}, "scenario": {},
             "sweep": {{ "seeds": [{}], "p": [0.5] }} }}"#,
        classic(r#"{ "num": [0.999999] }"#, INVERSE, 1.0, 30),
        scenario(30, 1.0, r#"{ "kind": "all" }"#, 40),
        seeds.join(",")
    );
    let r = run("sweep", &cfg, &[], &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = r.read("sweep.csv");
    let factors = csv_column(&table, "reduction_factor");
    assert_eq!(factors.len(), 20);
    assert!(factors.iter().all(|f| f.parse::<f64>().unwrap() >= 1.0));
    assert!(Path::new(&r.out.join("runs/run_0019/metrics.json")).exists());
}

#[test]
fn destabilized_design_diverges() {
    // learning gain of opposite sign: |1 - J L| > 1 at low frequency
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "controller": {}, "scenario": {} }}"#,
        classic(r#"{ "num": [1] }"#, r#"{ "num": [-2] }"#, 1.0, 20),
        scenario(20, 1.0, r#"{ "kind": "all" }"#, 200)
    );
    let r = run("simulate", &cfg, &[], &[]);
    assert_eq!(r.code, 1, "{}", r.stderr);
    assert!(r.stderr.contains("diverged"), "{}", r.stderr);
    let metrics = r.json("metrics.json");
    assert!(metrics["diverged_at"].is_u64());
}

#[test]
fn seed_flag_controls_realization() {
    let cfg = format!(
        r#"{{ "plant": {PLANT}, "controller": {}, "scenario": {} }}"#,
        classic(r#"{ "num": [0.999] }"#, INVERSE, 0.8, 20),
        scenario(20, 1.0, r#"{ "kind": "bernoulli", "p": 0.5 }"#, 20)
    );
    let a = run("simulate", &cfg, &[], &["--seed", "5"]);
    let b = run("simulate", &cfg, &[], &["--seed", "5"]);
    let c = run("simulate", &cfg, &[], &["--seed", "6"]);
    assert_eq!(a.read("simulation.csv"), b.read("simulation.csv"));
    assert_eq!(a.read("spectrum.csv"), b.read("spectrum.csv"));
    assert_ne!(a.read("simulation.csv"), c.read("simulation.csv"));
}
