//! End-to-end checks of the `pecs` binary: pipeline composition, exit
//! codes, provenance replay, and plot structure.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pecs(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pecs"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawning pecs")
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn pipeline_gillespie_correlate_fit() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_success(&pecs(
        &[
            "gillespie",
            "--model",
            "three-level-spontaneous",
            "--kex",
            "50",
            "--duration",
            "0.02",
            "--seed",
            "9",
            "--out",
            "stream.ttag1",
            "--out-dir",
            "out",
        ],
        root,
    ));
    assert_success(&pecs(
        &[
            "correlate",
            "--in",
            "stream.ttag1",
            "--tau-min",
            "0",
            "--tau-max",
            "2e-6",
            "--tau-res",
            "4e-9",
            "--out-dir",
            "out",
        ],
        root,
    ));
    assert_success(&pecs(
        &[
            "fit",
            "--g2",
            "out/correlate.csv",
            "--n",
            "2..3",
            "--out-dir",
            "out",
        ],
        root,
    ));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out/fit_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["best_n"], 3, "three-level data should select n = 3");
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out/correlate_meta.json")).unwrap())
            .unwrap();
    assert!(meta["rate_a_cps"].as_f64().unwrap() > 1e5);
}

#[test]
fn rerun_from_echoed_config_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_success(&pecs(
        &[
            "gillespie",
            "--model",
            "three-level-spontaneous",
            "--kex",
            "25",
            "--duration",
            "0.005",
            "--seed",
            "4",
            "--out",
            "s.ttag1",
            "--out-dir",
            "out",
        ],
        root,
    ));
    assert_success(&pecs(
        &[
            "correlate",
            "--in",
            "s.ttag1",
            "--tau-min",
            "-1e-6",
            "--tau-max",
            "1e-6",
            "--tau-res",
            "1e-8",
            "--out-dir",
            "out",
        ],
        root,
    ));
    let first = fs::read(root.join("out/correlate.csv")).unwrap();
    let first_meta = fs::read(root.join("out/correlate_meta.json")).unwrap();
    assert_success(&pecs(
        &["correlate", "--config", "out/correlate_config.json"],
        root,
    ));
    assert_eq!(first, fs::read(root.join("out/correlate.csv")).unwrap());
    assert_eq!(
        first_meta,
        fs::read(root.join("out/correlate_meta.json")).unwrap()
    );
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();

    // Usage error: unknown flag -> 2.
    let usage = pecs(&["correlate", "--bogus"], root);
    assert_eq!(usage.status.code(), Some(2));

    // Module error: correlating an empty stream -> 1 with a JSON
    // diagnostic on stderr.
    let mut header = Vec::new();
    header.extend_from_slice(b"TTAG");
    header.extend_from_slice(&1u16.to_le_bytes());
    header.extend_from_slice(&1e-9f64.to_le_bytes());
    header.extend_from_slice(&1.0f64.to_le_bytes());
    header.extend_from_slice(&0u64.to_le_bytes());
    fs::write(root.join("empty.ttag1"), header).unwrap();
    let module = pecs(
        &[
            "correlate",
            "--in",
            "empty.ttag1",
            "--tau-min",
            "0",
            "--tau-max",
            "1e-6",
            "--tau-res",
            "1e-8",
            "--out-dir",
            "out",
        ],
        root,
    );
    assert_eq!(module.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&module.stderr);
    let diagnostic: serde_json::Value =
        serde_json::from_str(stderr.lines().last().unwrap()).unwrap();
    assert!(diagnostic["error"].as_str().unwrap().contains("no events"));

    // Config files with unknown keys are rejected.
    fs::write(root.join("bad.json"), r#"{"unknown_key": 1}"#).unwrap();
    let bad = pecs(&["correlate", "--config", "bad.json"], root);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn import_csv_to_ttag1_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::write(
        root.join("events.csv"),
        "channel,timestamp_ticks\n0,100\n1,250\n0,300\n",
    )
    .unwrap();
    assert_success(&pecs(
        &[
            "import",
            "--in",
            "events.csv",
            "--format",
            "csv",
            "--resolution",
            "1e-9",
            "--out",
            "events.ttag1",
            "--out-dir",
            "out",
        ],
        root,
    ));
    assert_success(&pecs(
        &[
            "import",
            "--in",
            "events.ttag1",
            "--format",
            "ttag1",
            "--out-dir",
            "out2",
        ],
        root,
    ));
    let a: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out/import_report.json")).unwrap())
            .unwrap();
    let b: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out2/import_report.json")).unwrap())
            .unwrap();
    assert_eq!(a["counts_a"], b["counts_a"]);
    assert_eq!(a["counts_b"], b["counts_b"]);
    assert_eq!(a["total_time_s"], b["total_time_s"]);
}

#[test]
fn reproduce_fig5a_writes_three_curves() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_success(&pecs(&["reproduce", "fig5a", "--out-dir", "repro"], root));
    for kex in ["25", "50", "100"] {
        let path = root.join(format!("repro/fig5a_kex{kex}.csv"));
        assert!(path.exists(), "missing {}", path.display());
        let text = fs::read_to_string(path).unwrap();
        assert!(text.lines().count() > 100);
    }
}

#[test]
fn plot_renders_error_bars_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    // Hand-written asymmetric-error curve.
    let mut csv = String::from("tau_s,g2,err_plus,err_minus,raw_counts\n");
    for k in 1..=20 {
        let t = k as f64 * 1e-9;
        csv.push_str(&format!("{t},1.0,0.2,0.05,10\n"));
    }
    fs::write(root.join("curve.csv"), csv).unwrap();
    assert_success(&pecs(
        &[
            "plot",
            "--in",
            "curve.csv",
            "--out-dir",
            "out",
            "--title",
            "fixture",
        ],
        root,
    ));
    let svg = fs::read_to_string(root.join("out/plot.svg")).unwrap();
    assert_eq!(svg.matches("class=\"errorbar\"").count(), 20);
    assert_eq!(svg.matches("class=\"series\"").count(), 1);
    assert!(svg.contains("class=\"reference\""));

    // Empty input is a module error.
    fs::write(root.join("empty.csv"), "tau_s,g2\n").unwrap();
    let bad = pecs(&["plot", "--in", "empty.csv", "--out-dir", "out"], root);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn simulate_antibunched_template_reports_low_g2_zero() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    assert_success(&pecs(
        &[
            "simulate",
            "--model",
            "three-level-spontaneous",
            "--kex",
            "50",
            "--t-max",
            "1e-5",
            "--out-dir",
            "out",
        ],
        root,
    ));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(root.join("out/simulate_report.json")).unwrap())
            .unwrap();
    assert!(report["g2_first"].as_f64().unwrap() < 1e-3);
    assert!(report["p_err"].as_f64().unwrap() < 1e-6);
}
