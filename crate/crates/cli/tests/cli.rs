use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cqed_core::fit::{FitModel, FitParams};
use cqed_core::io::read_spectrum_csv;
use cqed_core::params::angular;
use cqed_core::presets::{fiber_ring, SURVEY};
use cqed_core::spectrum::linspace;
use cqed_core::transfer::t_ensemble_homogeneous;
use serde_json::Value;

fn cqed(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqed"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = cqed(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn manifest(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn spectrum_rows(path: PathBuf) -> Vec<[f64; 3]> {
    read_spectrum_csv(fs::File::open(path).unwrap()).unwrap()
}

/// `(branch index, βN, Δ/2π)` rows of a resonance CSV.
fn resonance_rows(path: PathBuf) -> Vec<(i64, f64, f64)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn fiber_ring_spectrum_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "spectrum",
            "--model",
            "cascaded",
            "--beta-n",
            "12.4",
            "--gamma-mhz",
            "2.61",
            "--fsr-mhz",
            "7.1",
            "--delta-ca-mhz",
            "1.12",
            "--span-fsr",
            "3",
            "--points",
            "601",
        ],
    );
    let rows = spectrum_rows(dir.path().join("spectrum.csv"));
    assert_eq!(rows.len(), 601);
    assert_eq!(rows[0][0], -21.3e6);
    assert!((rows[0][1] - rows[0][0] - 1.12e6).abs() < 1e-6);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r[2])));

    let m = manifest(dir.path().join("spectrum.manifest.json"));
    assert_eq!(m["subcommand"], "spectrum");
    assert_eq!(m["parameters"]["snapshot"]["ensemble"]["n_atoms"], 2480);
    assert_eq!(m["output_files"].as_array().unwrap().len(), 2);
    assert!(m["tool_version"].is_string());
    assert!(m["wall_time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn waveguide_column_is_transmission_squared() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "spectrum",
            "--model",
            "waveguide",
            "--n",
            "40",
            "--beta",
            "0.02",
            "--gamma-mhz",
            "5",
            "--fsr-mhz",
            "200",
            "--t-rt",
            "0.9",
            "--r",
            "0.0",
            "--points",
            "501",
        ],
    );
    let gamma = angular(5e6);
    for [x, _, refl] in spectrum_rows(dir.path().join("spectrum.csv")) {
        let t = t_ensemble_homogeneous(0.02, 40, gamma, angular(x)).value;
        let expected = 0.81 * t.norm_sqr();
        assert!(
            (refl - expected).abs() <= 1e-14 * expected.max(1e-300),
            "{x}: {refl} vs {expected}"
        );
    }
}

#[test]
fn bare_cavity_cascaded_and_tc_agree_near_resonance() {
    let dir = tempfile::tempdir().unwrap();
    let common = [
        "--gamma-mhz",
        "5",
        "--fsr-mhz",
        "200",
        "--t-rt",
        "0.999",
        "--r",
        "0.999",
        "--span-fsr",
        "0.5",
    ];
    let mut a = vec!["spectrum", "--model", "cascaded", "--n", "0", "--prefix", "cascaded"];
    a.extend(common);
    ok(dir.path(), &a);
    let mut b = vec!["spectrum", "--model", "tc", "--g", "0", "--prefix", "tc"];
    b.extend(common);
    ok(dir.path(), &b);
    let ca = spectrum_rows(dir.path().join("cascaded.csv"));
    let tc = spectrum_rows(dir.path().join("tc.csv"));
    assert_eq!(ca.len(), tc.len());
    let mut worst = 0.0f64;
    for (p, q) in ca.iter().zip(&tc) {
        assert_eq!(p[0], q[0]);
        if p[0].abs() <= 0.05 * 200e6 {
            worst = worst.max((p[2] - q[2]).abs());
        }
    }
    assert!(worst < 1e-3, "worst {worst}");
}

#[test]
fn flags_override_config_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("system.json");
    fs::write(
        &cfg,
        r#"{"n_atoms": 10, "beta": 0.01, "gamma_hz_over_2pi": 3e6, "nu_fsr_hz": 1e8, "t_rt": 0.99, "r": 0.99}"#,
    )
    .unwrap();
    ok(
        dir.path(),
        &[
            "spectrum",
            "--config",
            cfg.to_str().unwrap(),
            "--gamma-mhz",
            "2.61",
            "--points",
            "11",
        ],
    );
    let m = manifest(dir.path().join("spectrum.manifest.json"));
    let warnings = m["warnings"].as_array().unwrap();
    assert_eq!(warnings.len(), 1);
    assert!(warnings[0].as_str().unwrap().contains("--gamma-mhz"));
    assert_eq!(m["parameters"]["system"]["gamma_hz_over_2pi"], 2.61e6);
    assert_eq!(m["parameters"]["system"]["n_atoms"], 10);
    assert_eq!(m["input_files"][0].as_str().unwrap(), cfg.to_str().unwrap());
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, r#"{"n_atoms": 1, "beta": 0.1, "kappa": 3}"#).unwrap();
    let out = cqed(dir.path(), &["spectrum", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`kappa`") && err.contains("`nu_fsr_hz`"), "{err}");
}

#[test]
fn bad_flag_values_are_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["spectrum", "--beta", "1.5", "--n", "3"][..],
        &["spectrum", "--model", "cascaded", "--g", "1"][..],
        &["resonances"][..],
        &["spectrum", "--model", "nonsense"][..],
    ] {
        assert_eq!(cqed(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn oracle_check_is_seed_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &["oracle-check", "--instances", "100", "--seed", "11", "--prefix", "a"],
    );
    ok(
        dir.path(),
        &["oracle-check", "--instances", "100", "--seed", "11", "--prefix", "b"],
    );
    ok(
        dir.path(),
        &["oracle-check", "--instances", "100", "--seed", "12", "--prefix", "c"],
    );
    let a = fs::read(dir.path().join("a.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.json")).unwrap());
    assert_ne!(a, fs::read(dir.path().join("c.json")).unwrap());
    let report: Value = serde_json::from_slice(&a).unwrap();
    assert!(report["max_abs_error"].as_f64().unwrap() < 1e-9);
}

#[test]
fn oracle_tolerance_breach_exits_with_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = cqed(dir.path(), &["oracle-check", "--instances", "5", "--tolerance", "0"]);
    assert_eq!(out.status.code(), Some(3));
}

fn write_synthetic(path: &Path) {
    let exp = fiber_ring();
    let model = FitModel {
        gamma: exp.gamma,
        nu_fsr: exp.nu_fsr,
        beta: exp.beta,
    };
    let truth = FitParams {
        beta_n_product: 12.4,
        delta_ca: exp.delta_ca,
        t_rt: exp.resonator.t_rt(),
        r: exp.resonator.r(),
        amplitude_scale: 1.0,
        frequency_offset: 0.0,
    };
    let x = linspace(-2.0 * exp.nu_fsr, 2.0 * exp.nu_fsr, 300);
    let y = model.curve(&truth, &x).unwrap();
    let mut text = String::from("probe_detuning_hz,signal\n");
    for (a, b) in x.iter().zip(&y) {
        text.push_str(&format!("{a:?},{:?}\n", 1000.0 * b));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn fit_recovers_parameters_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("counts.csv");
    write_synthetic(&data);
    let args = |prefix: &'static str| {
        vec![
            "fit".to_string(),
            data.to_str().unwrap().to_string(),
            "--raw".into(),
            "--beta-n".into(),
            "11".into(),
            "--delta-ca-mhz".into(),
            "0.9".into(),
            "--seed".into(),
            "5".into(),
            "--prefix".into(),
            prefix.into(),
        ]
    };
    for p in ["one", "two"] {
        let a = args(p);
        ok(dir.path(), &a.iter().map(String::as_str).collect::<Vec<_>>());
    }
    let one = fs::read(dir.path().join("one.json")).unwrap();
    assert_eq!(one, fs::read(dir.path().join("two.json")).unwrap());
    assert_eq!(
        fs::read(dir.path().join("one_curve.csv")).unwrap(),
        fs::read(dir.path().join("two_curve.csv")).unwrap()
    );
    let report: Value = serde_json::from_slice(&one).unwrap();
    let bn = report["estimates"]["beta_n_product"].as_f64().unwrap();
    assert!((bn / 12.4 - 1.0).abs() < 0.01, "{bn}");
    let dca = report["estimates"]["delta_ca"].as_f64().unwrap();
    assert!((dca / fiber_ring().delta_ca - 1.0).abs() < 0.01, "{dca}");
    assert_eq!(report["uncertainty_method"], "curvature-based, statistical only");
    let split = report["splitting_over_fsr"].as_f64().unwrap();
    assert!((split - 2.41).abs() < 0.02, "{split}");
    let m = manifest(dir.path().join("one.manifest.json"));
    assert_eq!(m["parameters"]["raw_input"], true);
    assert!(m["parameters"]["baseline"].as_f64().unwrap() > 900.0);
}

#[test]
fn validity_reproduces_survey_and_custom_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "validity",
            "--format",
            "json",
            "--n",
            "100",
            "--beta",
            "0.01",
            "--gamma-mhz",
            "5",
            "--fsr-mhz",
            "100",
            "--label",
            "test system",
        ],
    );
    let rows: Vec<Value> =
        serde_json::from_str(&fs::read_to_string(dir.path().join("validity.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), SURVEY.len() + 1);
    for (row, survey) in rows.iter().zip(SURVEY) {
        assert_eq!(row["label"], survey.label);
        let a = row["ratio_g_fsr"].as_f64().unwrap();
        assert!((a / survey.printed_g_over_fsr - 1.0).abs() < 0.03);
        let b = row["ratio_loss_fsr"].as_f64().unwrap();
        assert!((b / survey.printed_loss_ratio - 1.0).abs() < 0.03);
    }
    // g_N = √(2 · 1 · 2π·5 MHz · 100 MHz) = 2π · 12.6157 MHz, g_N/ν = 0.792665
    let custom = &rows[SURVEY.len()];
    assert_eq!(custom["label"], "test system");
    assert!((custom["g_n_hz_over_2pi"].as_f64().unwrap() - 12.615_662_6e6).abs() < 1.0);
    assert!((custom["ratio_g_fsr"].as_f64().unwrap() - 0.792_665_5).abs() < 1e-6);
    assert_eq!(custom["optical_depth"], 4.0);
    assert_eq!(custom["coupling_below_fsr"], "violated");
}

#[test]
fn validity_of_empty_ensemble_is_trivially_satisfied() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["validity", "--no-survey", "--n", "0"]);
    let text = fs::read_to_string(dir.path().join("validity.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("custom,0.0,"));
    assert!(lines[1].ends_with("satisfied,satisfied,satisfied,satisfied"));
}

#[test]
fn convert_round_trips_mirrors_and_rates() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "convert",
            "--format",
            "json",
            "--prefix",
            "k",
            "rates",
            "--t-rt",
            "0.97",
            "--r",
            "0.99",
            "--fsr-mhz",
            "7.1",
        ],
    );
    let k: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("k.json")).unwrap()).unwrap();
    let k0 = k["kappa0_hz_over_2pi"].as_f64().unwrap() / 1e6;
    let ke = k["kappa_ext_hz_over_2pi"].as_f64().unwrap() / 1e6;
    ok(
        dir.path(),
        &[
            "convert",
            "--format",
            "json",
            "--prefix",
            "m",
            "mirrors",
            "--kappa0-mhz",
            &k0.to_string(),
            "--kappa-ext-mhz",
            &ke.to_string(),
            "--fsr-mhz",
            "7.1",
        ],
    );
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
    assert!((m["t_rt"].as_f64().unwrap() - 0.97).abs() < 1e-12);
    assert!((m["r"].as_f64().unwrap() - 0.99).abs() < 1e-12);
}

#[test]
fn convert_coupling_matches_experimental_value() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "convert",
            "coupling",
            "--beta",
            "0.005",
            "--n",
            "2592",
            "--gamma-mhz",
            "2.61",
            "--fsr-mhz",
            "7.1",
        ],
    );
    let text = fs::read_to_string(dir.path().join("convert.csv")).unwrap();
    let values: BTreeMap<&str, f64> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (k, v) = l.split_once(',').unwrap();
            (k, v.parse().unwrap())
        })
        .collect();
    assert!((values["g_n_hz_over_2pi"] / 8.74e6 - 1.0).abs() < 5e-3);
    assert!((values["beta_n_product"] - 12.96).abs() < 1e-12);
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["resonances", "--preset", "a", "--steps", "0"]);
    let text = fs::read_to_string(dir.path().join("resonances.csv")).unwrap();
    assert_eq!(text, "model,branch_index,beta_n,delta_hz_over_2pi,contrast\n");
}

#[test]
fn cascaded_branches_keep_moving_where_multimode_saturates() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        dir.path(),
        &[
            "resonances",
            "--preset",
            "b",
            "--prefix",
            "b",
            "--beta-n-min",
            "18",
            "--beta-n-max",
            "20",
            "--steps",
            "5",
        ],
    );
    ok(
        dir.path(),
        &[
            "resonances",
            "--preset",
            "d",
            "--prefix",
            "d",
            "--beta-n-min",
            "18",
            "--beta-n-max",
            "20",
            "--steps",
            "5",
        ],
    );

    // d|Δ|/d(βN) between the last two grid points
    let slope = |rows: &[(i64, f64, f64)], k: i64, outermost: bool| {
        let at = |bn: f64| {
            let d = rows.iter().filter(|p| p.0 == k && p.1 == bn).map(|p| p.2.abs());
            if outermost {
                d.fold(0.0, f64::max)
            } else {
                d.fold(f64::INFINITY, f64::min)
            }
        };
        (at(20.0) - at(19.5)) / 0.5
    };
    let multimode = resonance_rows(dir.path().join("b.csv"));
    let tc_slope = (-2..=2).map(|k| slope(&multimode, k, false).abs()).fold(0.0, f64::max);
    let cascaded = resonance_rows(dir.path().join("d.csv"));
    let outer = slope(&cascaded, 0, true);
    assert!(outer > 10.0 * tc_slope, "cascaded {outer} vs multimode {tc_slope}");
    // the central pair sits beyond half a free spectral range
    let edge = cascaded
        .iter()
        .filter(|p| p.0 == 0)
        .map(|p| p.2.abs())
        .fold(0.0, f64::max);
    assert!(edge > 0.5 * 10e6);
}

#[test]
fn every_output_is_listed_in_exactly_one_manifest() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["spectrum", "--points", "21"]);
    ok(dir.path(), &["validity"]);
    ok(
        dir.path(),
        &["resonances", "--preset", "c", "--steps", "3", "--format", "json"],
    );
    ok(dir.path(), &["oracle-check", "--instances", "3"]);

    let mut listed: BTreeMap<PathBuf, usize> = BTreeMap::new();
    let mut files = Vec::new();
    for entry in fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.to_str().unwrap().ends_with(".manifest.json") {
            for f in manifest(path)["output_files"].as_array().unwrap() {
                *listed.entry(PathBuf::from(f.as_str().unwrap())).or_default() += 1;
            }
        } else {
            files.push(path);
        }
    }
    assert_eq!(files.len(), listed.len());
    for f in files {
        assert_eq!(listed.get(&f), Some(&1), "{}", f.display());
    }
}
