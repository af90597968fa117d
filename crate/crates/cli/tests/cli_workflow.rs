//! End-to-end runs of the `decouple` binary: workflows, schemas, exit
//! codes, and bit-level determinism.

use std::path::Path;
use std::process::{Command, Output};

fn decouple(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decouple"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("spawn decouple")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn sha(path: &Path) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(std::fs::read(path).unwrap());
    format!("{:x}", h.finalize())
}

#[test]
fn simulate_fit_path_select_eval_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&decouple(
        &[
            "simulate", "--n", "60", "--p", "12", "--k", "3", "--s", "8", "--rho", "0.2",
            "--seed", "5", "--out-dir", "sim",
        ],
        d,
    ));
    assert!(d.join("sim/data.csv").exists());
    assert!(d.join("sim/truth.csv").exists());
    assert!(d.join("sim/test.csv").exists());
    assert!(d.join("sim/manifest.json").exists());

    assert_ok(&decouple(
        &[
            "fit", "--data", "sim/data.csv", "--prior", "ss", "--draws", "400", "--burnin",
            "100", "--seed", "7", "--out", "fit.json", "--draws-out", "draws.csv",
        ],
        d,
    ));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("fit.json")).unwrap()).unwrap();
    assert_eq!(fit["prior"], "ss");
    assert_eq!(fit["pip"].as_array().unwrap().len(), 12);

    assert_ok(&decouple(
        &[
            "path", "--data", "sim/data.csv", "--fit", "fit.json", "--draws", "draws.csv",
            "--penalty", "fd", "--out", "path.json",
        ],
        d,
    ));
    let path: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("path.json")).unwrap()).unwrap();
    assert_eq!(path["kind"], "weighted");
    assert_eq!(path["penalty"], "fd");

    assert_ok(&decouple(
        &[
            "select", "--data", "sim/data.csv", "--path", "path.json", "--draws", "draws.csv",
            "--fit", "fit.json", "--rule", "benchmark", "--est-out", "est.json",
            "--report-out", "report.json",
        ],
        d,
    ));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["rule"], "benchmark");
    assert!(report["benchmark"].as_f64().unwrap() > 0.0);
    let entries = report["entries"].as_array().unwrap();
    assert!(!entries.is_empty());
    // Every entry carries the summary triple needed to redraw the
    // prediction-error band figure.
    for e in entries {
        assert!(e["pred_mean"].is_f64());
        assert!(e["pred_qlo"].is_f64());
        assert!(e["pred_qhi"].is_f64());
    }

    assert_ok(&decouple(
        &[
            "eval", "--estimate", "est.json", "--test", "sim/test.csv", "--truth",
            "sim/truth.csv", "--out", "metrics.json",
        ],
        d,
    ));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["mse"].as_f64().unwrap() > 0.0);
    assert!(metrics["fdp"].is_f64());
    assert!(metrics["tpp"].is_f64());

    // Without the truth file only MSE is available; fdp/tpp are null flags.
    assert_ok(&decouple(
        &[
            "eval", "--estimate", "est.json", "--test", "sim/test.csv", "--out",
            "metrics_no_truth.json",
        ],
        d,
    ));
    let m2: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(d.join("metrics_no_truth.json")).unwrap(),
    )
    .unwrap();
    assert!(m2["fdp"].is_null());
    assert!(m2["tpp"].is_null());
}

#[test]
fn hs_fit_has_no_pip_and_rejects_fd() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&decouple(
        &[
            "simulate", "--n", "40", "--p", "6", "--k", "2", "--s", "5", "--rho", "0.0",
            "--seed", "3", "--out-dir", "sim",
        ],
        d,
    ));
    assert_ok(&decouple(
        &[
            "fit", "--data", "sim/data.csv", "--prior", "hs", "--draws", "200", "--burnin",
            "50", "--seed", "2", "--out", "hs.json", "--draws-out", "hsdraws.csv",
        ],
        d,
    ));
    let fit: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("hs.json")).unwrap()).unwrap();
    assert_eq!(fit["prior"], "hs");
    assert!(fit.get("pip").is_none(), "horseshoe sidecar must not carry pips");

    let out = decouple(
        &[
            "path", "--data", "sim/data.csv", "--fit", "hs.json", "--draws", "hsdraws.csv",
            "--penalty", "fd", "--out", "bad.json",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("selection prior"), "stderr: {msg}");
}

#[test]
fn identical_flags_reproduce_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&decouple(
        &[
            "simulate", "--n", "40", "--p", "8", "--k", "2", "--s", "6", "--rho", "0.3",
            "--seed", "11", "--out-dir", "sim",
        ],
        d,
    ));
    for run in ["a", "b"] {
        assert_ok(&decouple(
            &[
                "fit", "--data", "sim/data.csv", "--prior", "ss", "--draws", "300",
                "--burnin", "60", "--seed", "9", "--out",
                &format!("fit_{run}.json"), "--draws-out", &format!("draws_{run}.csv"),
            ],
            d,
        ));
    }
    assert_eq!(sha(&d.join("fit_a.json")), sha(&d.join("fit_b.json")));
    assert_eq!(sha(&d.join("draws_a.csv")), sha(&d.join("draws_b.csv")));

    // Same for simulate itself.
    assert_ok(&decouple(
        &[
            "simulate", "--n", "40", "--p", "8", "--k", "2", "--s", "6", "--rho", "0.3",
            "--seed", "11", "--out-dir", "sim2",
        ],
        d,
    ));
    assert_eq!(sha(&d.join("sim/data.csv")), sha(&d.join("sim2/data.csv")));
}

#[test]
fn flag_validation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = decouple(
        &[
            "simulate", "--n", "20", "--p", "4", "--k", "1", "--s", "2", "--rho", "1.0",
            "--seed", "1", "--out-dir", "sim",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(2), "rho = 1.0 must be rejected");

    // Missing file is an I/O failure.
    let out = decouple(
        &[
            "fit", "--data", "nope.csv", "--prior", "ss", "--seed", "1", "--out", "f.json",
            "--draws-out", "d.csv",
        ],
        d,
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn two_point_grid_and_apm_and_fdr_rule() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&decouple(
        &[
            "simulate", "--n", "50", "--p", "10", "--k", "2", "--s", "8", "--rho", "0.1",
            "--seed", "21", "--out-dir", "sim",
        ],
        d,
    ));
    assert_ok(&decouple(
        &[
            "fit", "--data", "sim/data.csv", "--prior", "ss", "--draws", "400", "--burnin",
            "100", "--seed", "4", "--out", "fit.json", "--draws-out", "draws.csv",
        ],
        d,
    ));
    assert_ok(&decouple(
        &[
            "path", "--data", "sim/data.csv", "--fit", "fit.json", "--penalty", "is",
            "--eps", "0.001", "--grid", "2", "--out", "is2.json", "--csv-out", "is2.csv",
        ],
        d,
    ));
    let p: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("is2.json")).unwrap()).unwrap();
    let lambdas = p["lambdas"].as_array().unwrap();
    assert!(lambdas.len() <= 2 && !lambdas.is_empty());
    assert!(d.join("is2.csv").exists());

    assert_ok(&decouple(
        &[
            "apm", "--data", "sim/data.csv", "--fit", "fit.json", "--out", "apm.json",
        ],
        d,
    ));
    let apm: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("apm.json")).unwrap()).unwrap();
    assert_eq!(apm["kind"], "apm");

    assert_ok(&decouple(
        &[
            "select", "--data", "sim/data.csv", "--path", "apm.json", "--draws", "draws.csv",
            "--fit", "fit.json", "--rule", "fdr", "--fdr-threshold", "0.10", "--est-out",
            "est_fdr.json", "--report-out", "report_fdr.json",
        ],
        d,
    ));
    let rep: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("report_fdr.json")).unwrap())
            .unwrap();
    assert_eq!(rep["rule"], "fdr");
    assert!(rep["entries"][0]["local_fdr"].is_f64());
}

#[test]
fn baseline_and_bench_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_ok(&decouple(
        &[
            "simulate", "--n", "50", "--p", "10", "--k", "2", "--s", "8", "--rho", "0.0",
            "--seed", "31", "--out-dir", "sim",
        ],
        d,
    ));
    assert_ok(&decouple(
        &[
            "baseline", "--data", "sim/data.csv", "--method", "lasso", "--folds", "5",
            "--seed", "2", "--out", "cv.json",
        ],
        d,
    ));
    let cv: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("cv.json")).unwrap()).unwrap();
    assert_eq!(cv["method"], "lasso");
    assert_eq!(
        cv["cv_mse"].as_array().unwrap().len(),
        cv["lambda_grid"].as_array().unwrap().len()
    );

    std::fs::write(
        d.join("exp.json"),
        r#"{
  "schema_version": 1,
  "settings": [{"n": 40, "p": 8, "k": 2, "s_star": 6.0, "rho": 0.0}],
  "methods": ["mpm", "lasso"],
  "replicates": 2,
  "seed": 77,
  "draws": 300,
  "burnin": 60,
  "grid": 25,
  "folds": 5
}"#,
    )
    .unwrap();
    assert_ok(&decouple(
        &["bench", "--config", "exp.json", "--out-dir", "bench", "--jobs", "1"],
        d,
    ));
    let table = std::fs::read_to_string(d.join("bench/table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(
        lines.next().unwrap(),
        "setting,method,replicates,failures,size_mean,size_se,mse_mean,mse_se,fdp_mean,fdp_se,tpp_mean,tpp_se"
    );
    assert_eq!(lines.count(), 2);
    assert!(d.join("bench/reps").read_dir().unwrap().count() == 4);

    // Unknown config field is rejected by name, exit code 2.
    std::fs::write(d.join("bad.json"), r#"{"schema_version":1,"settings":[],"methods":[],"replicates":1,"seed":1,"surprise":true}"#).unwrap();
    let out = decouple(
        &["bench", "--config", "bad.json", "--out-dir", "bench2"],
        d,
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("surprise"));
}
