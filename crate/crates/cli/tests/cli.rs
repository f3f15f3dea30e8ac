use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_dressed-pa");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("DRESSED_PA_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (String, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    (header, rows)
}

#[test]
fn bands_minimum_at_zero_for_strong_coupling() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["bands", "--omega", "12", "--delta", "0"]);
    let report = json(&tmp.path().join("bands.json"));
    let q = report["minimum"]["q"].as_f64().unwrap();
    let e = report["minimum"]["energy"].as_f64().unwrap();
    assert!(q.abs() < 1e-9);
    assert!((e + 7.123_046_658).abs() < 1e-6);
    let (header, rows) = csv_rows(&tmp.path().join("bands.csv"));
    assert_eq!(
        header,
        "q_kr,E1_Er,E2_Er,E3_Er,w1_m-1,w1_m0,w1_m+1,w2_m-1,w2_m0,w2_m+1,w3_m-1,w3_m0,w3_m+1"
    );
    assert_eq!(rows.len(), 601);
    assert!(fs::read_to_string(tmp.path().join("bands.svg")).unwrap().contains("<circle"));
}

#[test]
fn bands_without_coupling_are_bare_parabolas() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["bands", "--omega", "0", "--points", "61"]);
    let (_, rows) = csv_rows(&tmp.path().join("bands.csv"));
    for row in rows {
        let q: f64 = row[0].parse().unwrap();
        let mut bare = [(q + 2.0).powi(2), q * q - 0.65, (q - 2.0).powi(2)];
        bare.sort_by(f64::total_cmp);
        for b in 0..3 {
            let e: f64 = row[1 + b].parse().unwrap();
            assert!((e - bare[b]).abs() < 1e-12, "q = {q}");
        }
    }
}

#[test]
fn negative_detuning_polarizes_toward_an_edge() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["bands", "--omega", "5.4", "--delta", "-2"]);
    let report = json(&tmp.path().join("bands.json"));
    let q = report["minimum"]["q"].as_f64().unwrap();
    let w: Vec<f64> = report["minimum_weights"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(q > 1.0, "q* = {q}");
    assert!(w[2] > 0.5 && w[2] > w[0] && w[2] > w[1], "{w:?}");
}

#[test]
fn coeffs_sweep_is_mirror_symmetric() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["coeffs", "--omega", "5.4", "--from", "-2.5", "--to", "2.5", "--points", "11"]);
    let (header, rows) = csv_rows(&tmp.path().join("coeffs.csv"));
    assert_eq!(header, "omega_r_Er,delta_Er,q_kr,energy_Er,c_m-1,c_m0,c_m+1");
    assert_eq!(rows.len(), 11);
    let f = |r: &Vec<String>, i: usize| r[i].parse::<f64>().unwrap();
    for i in 0..11 {
        let (a, b) = (&rows[i], &rows[10 - i]);
        assert!((f(a, 2) + f(b, 2)).abs() < 1e-8);
        assert!((f(a, 4) - f(b, 6)).abs() < 1e-8);
        assert!((f(a, 5) - f(b, 5)).abs() < 1e-8);
    }
}

#[test]
fn ratio_sweep_writes_both_variants_and_nominal() {
    let tmp = TempDir::new().unwrap();
    let out = ok(
        tmp.path(),
        &["ratio-sweep", "--axis", "delta", "--min", "-2.5", "--max", "2.5", "--points", "5", "--omega", "5.4", "--samples", "200"],
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("delta"));
    let (header, rows) = csv_rows(&tmp.path().join("ratio_band.csv"));
    assert_eq!(header, "axis_value_Er,mean,lower,upper,variant");
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r[4] == "interference").count(), 5);
    let (header, rows) = csv_rows(&tmp.path().join("ratio_nominal.csv"));
    assert_eq!(header, "omega_r_Er,delta_Er,ratio,ratio_no_interference");
    let ratio = |r: &Vec<String>| r[2].parse::<f64>().unwrap();
    assert!((ratio(&rows[2]) - 0.270_48).abs() < 1e-4);
    assert!((ratio(&rows[0]) - 0.010_269).abs() < 1e-5);

    let only = TempDir::new().unwrap();
    ok(only.path(), &["ratio-sweep", "--points", "3", "--samples", "100", "--no-interference"]);
    let (_, rows) = csv_rows(&only.path().join("ratio_band.csv"));
    assert!(rows.iter().all(|r| r[4] == "no_interference"));
}

#[test]
fn empty_sweep_range_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(tmp.path(), &["ratio-sweep", "--points", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(tmp.path(), &["ratio-sweep", "--min", "3", "--max", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn fit_recovers_noiseless_truth() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["simulate", "--omega", "0", "--noise", "0", "--set", "line.nu0_khz=4.0"]);
    let truth = json(&tmp.path().join("simulate.json"));
    let fit_dir = tmp.path().join("fit");
    ok(&fit_dir, &["fit", tmp.path().join("spectrum.csv").to_str().unwrap()]);
    let report = json(&fit_dir.join("fit.json"));
    let total = &report["fits"][0];
    assert_eq!(total["channel"], "total");
    assert_eq!(total["converged"], true);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    let eta = truth["eta_sup"].as_f64().unwrap();
    assert!(rel(total["eta_res"].as_f64().unwrap(), eta) < 1e-3);
    assert!(rel(total["n0"].as_f64().unwrap(), 1.1e4) < 1e-3);
    assert!((total["nu0"].as_f64().unwrap() - 4.0).abs() < 0.02);
    assert!(rel(total["gamma"].as_f64().unwrap(), 20.0) < 1e-3);
    let k = total["k_pa"].as_f64().unwrap();
    assert!(rel(k, truth["k_sup"].as_f64().unwrap()) < 1e-3);
}

#[test]
fn moderate_loss_normalizes_to_064() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["simulate", "--omega", "0", "--noise", "0.02", "--set", "line.bare_loss=0.36"]);
    let fit_dir = tmp.path().join("fit");
    ok(&fit_dir, &["fit", tmp.path().join("spectrum.csv").to_str().unwrap()]);
    let (header, rows) = csv_rows(&fit_dir.join("fit_normalized.csv"));
    assert_eq!(header, "detuning_khz,atoms_total,atoms_m_minus1,atoms_m0,atoms_m_plus1,stderr");
    let min = rows
        .iter()
        .map(|r| r[1].parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!((min - 0.64).abs() < 0.03, "normalized minimum {min}");
    let report = json(&fit_dir.join("fit.json"));
    assert!((report["loss"]["total_fit"].as_f64().unwrap() - 0.36).abs() < 0.02);
}

#[test]
fn unsorted_spectrum_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("bad.csv");
    fs::write(&input, "detuning_khz,atoms_total\n-5,100\n5,90\n0,80\n10,100\n20,100\n").unwrap();
    let out = run(tmp.path(), &["fit", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4") && err.contains("not strictly greater"), "{err}");

    let out = run(tmp.path(), &["fit", tmp.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_is_flagged_and_strict_exits_3() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["simulate", "--omega", "0"]);
    let input = tmp.path().join("spectrum.csv");
    let args = ["fit", input.to_str().unwrap(), "--set", "fit.max_iterations=3", "--set", "fit.restarts=0"];
    let fit_dir = tmp.path().join("fit");
    ok(&fit_dir, &args);
    assert_eq!(json(&fit_dir.join("fit.json"))["fits"][0]["converged"], false);
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(run(&fit_dir, &strict).status.code(), Some(3));
}

#[test]
fn mixture_modes_report_component_losses() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["mixture-sim"]);
    let report = json(&tmp.path().join("mixture.json"));
    let loss: Vec<f64> = report["resonant_loss"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!((loss[1] - 0.79).abs() < 1e-6);
    assert!(loss[0] < loss[1] && loss[2] < loss[1]);
    let (header, rows) = csv_rows(&tmp.path().join("mixture.csv"));
    assert_eq!(header, "t_s,N_m-1,N_m0,N_m+1,molecules_cumulative");
    assert_eq!(rows.len(), 401);

    let sim = TempDir::new().unwrap();
    ok(sim.path(), &["simulate", "--mode", "mixture", "--noise", "0"]);
    assert!(sim.path().join("mixture.csv").exists());
    assert!(sim.path().join("spectrum.csv").exists());
}

#[test]
fn superposition_scales_bare_eta_by_rate_ratio() {
    let tmp = TempDir::new().unwrap();
    ok(tmp.path(), &["simulate", "--omega", "8", "--delta", "0"]);
    let r = json(&tmp.path().join("simulate.json"));
    let ratio = r["rate_ratio"].as_f64().unwrap();
    assert!((ratio - 0.144_513_7).abs() < 1e-6);
    let (bare, sup) = (r["eta_bare"].as_f64().unwrap(), r["eta_sup"].as_f64().unwrap());
    assert!((sup / bare - ratio).abs() < 1e-12);
    assert!(r["resonant_loss"].as_f64().unwrap() < r["bare_resonant_loss"].as_f64().unwrap());

    let none = TempDir::new().unwrap();
    ok(none.path(), &["simulate", "--omega", "8", "--no-interference"]);
    let r = json(&none.path().join("simulate.json"));
    assert!((r["rate_ratio"].as_f64().unwrap() - 0.572_26).abs() < 1e-4);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(run(tmp.path(), &["simulate", "--mode", "plasma"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["bands", "--omega", "-1"]).status.code(), Some(1));
    assert_eq!(run(tmp.path(), &["bands", "--set", "dressing.omegaa=1"]).status.code(), Some(1));
    let help = Command::new(BIN).arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("ratio-sweep"));
}

#[test]
fn config_file_from_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, "[dressing]\nomega_r = 12.0\n").unwrap();
    let out = Command::new(BIN)
        .args(["bands", "--format", "json", "--out-dir"])
        .arg(tmp.path())
        .env("DRESSED_PA_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let report = json(&tmp.path().join("bands.json"));
    assert_eq!(report["params"]["omega_r"], 12.0);
    assert!(!tmp.path().join("bands.csv").exists());

    let out = Command::new(BIN)
        .args(["bands", "--out-dir"])
        .arg(tmp.path())
        .env("DRESSED_PA_CONFIG", tmp.path().join("nope.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn svg_output_leaves_csv_unchanged() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    ok(a.path(), &["simulate", "--mode", "mixture", "--format", "csv"]);
    ok(b.path(), &["simulate", "--mode", "mixture", "--format", "csv", "--format", "svg"]);
    for name in ["spectrum.csv", "mixture.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    assert!(!a.path().join("spectrum.svg").exists());
    assert!(b.path().join("spectrum.svg").exists());
}
