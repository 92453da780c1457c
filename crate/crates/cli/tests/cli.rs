use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fluxgate"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn fixture() -> Value {
    let path =
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/concurrent_paper_regime.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn config(name: &str) -> String {
    configs().join(name).display().to_string()
}

#[test]
fn simulate_sequential_paper_regime() {
    let out = run(&["simulate", "--config", &config("paper_regime.json")]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["total_time_ns"].as_f64().unwrap() - 15.0).abs() < 1e-9);
    assert!(v["fidelity"].as_f64().unwrap() >= 1.0 - 1e-10);
    assert_eq!(v["mode"], "sequential_ideal");
    assert_eq!(v["schedule"].as_array().unwrap().len(), 9);
    assert_eq!(v["gate_matrix"][3][3][0].as_f64().unwrap().round(), -1.0);
    assert_eq!(v["config"]["cavity"]["Q"].as_f64(), Some(1e4));
}

#[test]
fn simulate_concurrent_matches_oracle_fixture() {
    let out = run(&[
        "simulate",
        "--config",
        &config("paper_regime.json"),
        "--mode",
        "concurrent",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let f3 = fixture()["fidelity"].as_f64().unwrap();
    let got = json(&out)["fidelity"].as_f64().unwrap();
    assert!((got - f3).abs() <= 1e-6, "{got} vs {f3}");
}

#[test]
fn simulate_report_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let paths = [dir.path().join("a.json"), dir.path().join("b.json")];
    for p in &paths {
        let out = run(&[
            "simulate",
            "--config",
            &config("concurrent.json"),
            "--out",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        assert!(out.stdout.is_empty());
    }
    assert_eq!(
        std::fs::read(&paths[0]).unwrap(),
        std::fs::read(&paths[1]).unwrap()
    );
}

#[test]
fn resolved_config_reproduces_the_run() {
    let first = json(&run(&["simulate", "--config", &config("concurrent.json")]));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("resolved.json");
    std::fs::write(&path, serde_json::to_string(&first["config"]).unwrap()).unwrap();
    let second = json(&run(&["simulate", "--config", path.to_str().unwrap()]));
    assert_eq!(first, second);
}

#[test]
fn missing_config_exits_two_and_names_the_path() {
    let out = run(&["simulate", "--config", "/no/such/dir/device.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/dir/device.json"));
}

#[test]
fn validate_accepts_and_rejects() {
    let out = run(&["validate", "--config", &config("paper_regime.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("valid"));

    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("paper_regime.json")).unwrap();
    let cases = [
        (
            text.replace("\"nu_ghz\": 3", "\"nu_ghz\": 2.9"),
            "cavity off resonance",
        ),
        (text.replace("\"Q\": 10000", "\"Q\": -5"), "Q must be > 0"),
        (
            text.replace("\"n_max\": 2", "\"n_max\": 2, \"size\": 3"),
            "unknown field `size`",
        ),
        (text.replace("\"mode\"", "\"mode\" "), ""),
        (text.replacen("[0, 5, 15, 18]", "[0, 5, 15]", 1), "line 3"),
    ];
    for (i, (body, needle)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("case{i}.json"));
        std::fs::write(&path, body).unwrap();
        let out = run(&["validate", "--config", path.to_str().unwrap()]);
        let stderr = String::from_utf8_lossy(&out.stderr);
        if needle.is_empty() {
            assert_eq!(out.status.code(), Some(0), "{stderr}");
        } else {
            assert_eq!(out.status.code(), Some(2));
            assert!(stderr.contains(needle), "case {i}: {stderr}");
        }
    }
}

#[test]
fn sweep_csv_keeps_order_for_any_worker_count() {
    let args = |jobs: &'static str| {
        run(&[
            "sweep",
            "--config",
            &config("concurrent.json"),
            "--axis",
            "omega_over_g",
            "--values",
            "30,3,10",
            "--jobs",
            jobs,
            "--format",
            "csv",
        ])
    };
    let one = args("1");
    let four = args("4");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, four.stdout);

    let text = String::from_utf8(one.stdout).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(
        reader.headers().unwrap(),
        vec!["axis_value", "fidelity", "leakage", "total_time_ns"]
    );
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(
        rows.iter().map(|r| r[0]).collect::<Vec<_>>(),
        vec![30.0, 3.0, 10.0]
    );
    let f3 = fixture()["fidelity"].as_f64().unwrap();
    assert!((rows[1][1] - f3).abs() <= 1e-6);
    assert!(rows[1][1] < rows[2][1] && rows[2][1] < rows[0][1]);
}

#[test]
fn sweep_json_and_bad_axis() {
    let out = run(&[
        "sweep",
        "--config",
        &config("paper_regime.json"),
        "--axis",
        "g_asymmetry",
        "--values",
        "-0.2,0,0.2",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["axis"], "g_asymmetry");
    for p in v["points"].as_array().unwrap() {
        assert!(p["fidelity"].as_f64().unwrap() > 1.0 - 1e-10);
    }
    let out = run(&[
        "sweep",
        "--config",
        &config("paper_regime.json"),
        "--axis",
        "chi",
        "--values",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproduce_paper_passes_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for name in ["one.json", "two.json"] {
        let path = dir.path().join(name);
        let out = run(&["reproduce-paper", "--out", path.to_str().unwrap()]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
        reports.push(std::fs::read(&path).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(v["all_pass"], true);
    assert_eq!(v["checks"].as_array().unwrap().len(), 7);
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn perturbed_coupling_fails_only_the_timing_check() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&[
        "reproduce-paper",
        "--perturb-g1",
        "0.1",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let tau = check(&v, "gate_time_ns");
    assert_eq!(tau["pass"], false);
    let expected = 1e9 / (2.0 * 110e6) + 1e9 / (2.0 * 100e6) + 3e9 / (2.0 * 300e6);
    assert!((tau["computed"].as_f64().unwrap() - expected).abs() < 1e-9);
    assert_eq!(check(&v, "gate_matrix")["pass"], true);
    assert_eq!(check(&v, "photon_lifetime_ns")["pass"], true);
}

#[test]
fn lossless_lindblad_reproduce_matches_the_concurrent_gate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = run(&[
        "reproduce-paper",
        "--mode",
        "lindblad",
        "--decoherence-scale",
        "0",
        "--out",
        path.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(check(&v, "closed_limit")["pass"], true);
    // Concurrent driving at Ω/g = 3 is far from the ideal gate, so the
    // diagonal comparison fails in this mode.
    assert_eq!(check(&v, "gate_matrix")["pass"], false);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_is_rejected_outside_sweep() {
    let out = run(&[
        "simulate",
        "--config",
        &config("paper_regime.json"),
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn fixture_requires_dev_and_is_byte_stable() {
    let out = run(&["fixture", "--steps", "2000"]);
    assert_eq!(out.status.code(), Some(2));

    let a = run(&["--dev", "fixture", "--steps", "2000"]);
    let b = run(&["--dev", "fixture", "--steps", "2000"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let small = json(&a);
    let frozen = fixture();
    assert_eq!(small["config_sha256"], frozen["config_sha256"]);
    assert_eq!(frozen["steps_per_gate"].as_u64(), Some(1_000_000));
    let (f, half) = (
        frozen["fidelity"].as_f64().unwrap(),
        frozen["fidelity_half_dt"].as_f64().unwrap(),
    );
    assert!((f - half).abs() < 1e-8);
    assert!((small["fidelity"].as_f64().unwrap() - f).abs() < 1e-8);
}
