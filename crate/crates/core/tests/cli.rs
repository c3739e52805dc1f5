use std::fs;
use std::path::Path;
use std::process::Command;

use surrloss::cli::{run, EXIT_CHECK_FAILED, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};

fn cli(args: &[&str]) -> i32 {
    let mut argv = vec!["surrloss"];
    argv.extend_from_slice(args);
    run(argv)
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn read_csv(p: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rdr = csv::Reader::from_path(p).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn train_then_predict_scalar() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = String::from("x0,y\n");
    for i in 0..40 {
        let x = -1.0 + 2.0 * i as f64 / 39.0;
        data.push_str(&format!("{x},{}\n", 0.5 * x));
    }
    fs::write(dir.path().join("train.csv"), data).unwrap();
    fs::write(dir.path().join("q.csv"), "x0\n-0.5\n0.0\n0.5\n").unwrap();
    let model = path(dir.path(), "model.json");
    let code = cli(&[
        "train", "--data", &path(dir.path(), "train.csv"), "--output", "scalar",
        "--sigma", "0.5", "--lambda", "1e-6", "--out", &model,
    ]);
    assert_eq!(code, EXIT_OK);
    let preds = path(dir.path(), "pred.csv");
    let code = cli(&["predict", "--model", &model, "--data", &path(dir.path(), "q.csv"), "--out", &preds]);
    assert_eq!(code, EXIT_OK);
    let (header, rows) = read_csv(&preds);
    assert_eq!(header, ["x0", "y"]);
    for r in rows {
        assert!((r[1] - 0.5 * r[0]).abs() < 0.02, "{r:?}");
    }
}

#[test]
fn labels_ratings_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let mut labels = String::from("x0,x1,y\n");
    let mut ratings = String::from("x0,r0,r1,r2\n");
    let mut hists = String::from("x0,p0,p1\n");
    for i in 0..20 {
        let off = i as f64 * 0.01;
        labels.push_str(&format!("{},{off},0\n{},{off},1\n", -1.0 - off, 1.0 + off));
        ratings.push_str(&format!("{},5,3,1\n{},1,3,5\n", -1.0 - off, 1.0 + off));
        hists.push_str(&format!("{},0.9,0.1\n{},0.2,0.8\n", -1.0 - off, 1.0 + off));
    }
    fs::write(dir.path().join("labels.csv"), labels).unwrap();
    fs::write(dir.path().join("ratings.csv"), ratings).unwrap();
    fs::write(dir.path().join("hists.csv"), hists).unwrap();
    fs::write(dir.path().join("q2.csv"), "x0,x1\n-1.05,0.0\n1.05,0.0\n").unwrap();
    fs::write(dir.path().join("q1.csv"), "x0\n-1.05\n1.05\n").unwrap();

    let cases = [
        ("labels.csv", "label", "q2.csv", vec!["x0", "x1", "y"]),
        ("ratings.csv", "ratings", "q1.csv", vec!["x0", "rank0", "rank1", "rank2"]),
        ("hists.csv", "histogram", "q1.csv", vec!["x0", "p0", "p1"]),
    ];
    for (file, kind, queries, expect) in cases {
        let model = path(dir.path(), &format!("{kind}.json"));
        let code = cli(&["train", "--data", &path(dir.path(), file), "--output", kind, "--sigma", "1", "--out", &model]);
        assert_eq!(code, EXIT_OK, "{kind}");
        let preds = path(dir.path(), &format!("{kind}.csv"));
        let code = cli(&["predict", "--model", &model, "--data", &path(dir.path(), queries), "--out", &preds]);
        assert_eq!(code, EXIT_OK, "{kind}");
        let (header, rows) = read_csv(&preds);
        assert_eq!(header, expect);
        let last = rows[0].len() - 1;
        match kind {
            "label" => {
                assert_eq!(rows[0][last], 0.0);
                assert_eq!(rows[1][last], 1.0);
            }
            "ratings" => {
                assert_eq!(rows[0][1..], [1.0, 2.0, 3.0]);
                assert_eq!(rows[1][1..], [3.0, 2.0, 1.0]);
            }
            _ => {
                for r in &rows {
                    assert!((r[1] + r[2] - 1.0).abs() < 1e-12);
                }
                assert!(rows[0][1] > 0.8 && rows[1][2] > 0.7);
            }
        }
    }
}

#[test]
fn cv_report_has_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let mut data = String::from("x0,y\n");
    for i in 0..30 {
        let x = i as f64 / 29.0;
        data.push_str(&format!("{x},{}\n", x * x));
    }
    fs::write(dir.path().join("d.csv"), data).unwrap();
    let out = path(dir.path(), "cv.json");
    let code = cli(&[
        "cv", "--data", &path(dir.path(), "d.csv"), "--output", "scalar", "--lambdas", "1e-3,1e-1",
        "--sigmas", "0.1,1", "--folds", "3", "--seed", "4", "--out", &out,
    ]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"]["rows"].as_array().unwrap().len(), 4);
    assert_eq!(v["seed"], 4);
    assert!(v["version"].as_str().unwrap().starts_with('v'));
    assert_eq!(v["config"]["folds"], 3);
}

#[test]
fn experiment_writes_json_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "cfg.json");
    fs::write(&cfg, r#"{"items": 4, "test_size": 10, "folds": 3}"#).unwrap();
    let out = path(dir.path(), "ranking.json");
    let code = cli(&[
        "experiment", "ranking", "--config", &cfg, "--sizes", "20", "--repetitions", "2", "--seed", "1", "--out", &out,
    ]);
    assert_eq!(code, EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["items"], 4);
    assert_eq!(v["config"]["base_seed"], 1);
    assert_eq!(v["results"][0]["raw"].as_array().unwrap().len(), 2);
    let curve = fs::read_to_string(dir.path().join("ranking.csv")).unwrap();
    assert!(curve.starts_with("method,metric,n,mean,std"));
    assert_eq!(curve.lines().count(), 3);
}

#[test]
fn check_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "fisher.json");
    assert_eq!(cli(&["check", "fisher", "--trials", "5", "--out", &out]), EXIT_OK);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["results"].as_array().unwrap().len(), 3);
    assert_eq!(cli(&["check", "comparison", "--trials", "20", "--out", &out]), EXIT_OK);
    assert_eq!(cli(&["check", "equivalence", "--trials", "3", "--out", &out]), EXIT_OK);
}

#[test]
fn failed_check_exits_three() {
    // a single draw per sample size is too noisy for the trend to hold
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "c.json");
    assert_eq!(cli(&["check", "consistency", "--trials", "1", "--seed", "1", "--out", &out]), EXIT_CHECK_FAILED);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(cli(&["train", "--data", "/nonexistent.csv", "--output", "scalar"]), EXIT_USAGE);
    fs::write(dir.path().join("d.csv"), "x0,y\n1,2\n").unwrap();
    assert_eq!(cli(&["train", "--data", &path(dir.path(), "d.csv")]), EXIT_USAGE);
    assert_eq!(cli(&["train", "--data", &path(dir.path(), "d.csv"), "--output", "scalar", "--lambda=-1"]), EXIT_USAGE);
    fs::write(dir.path().join("bad.csv"), "x0,y\n1,abc\n").unwrap();
    assert_eq!(cli(&["train", "--data", &path(dir.path(), "bad.csv"), "--output", "scalar"]), EXIT_USAGE);
}

#[test]
fn non_finite_input_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("d.csv"), "x0,y\nNaN,1\n0.5,2\n").unwrap();
    let code = cli(&["train", "--data", &path(dir.path(), "d.csv"), "--output", "scalar", "--out", &path(dir.path(), "m.json")]);
    assert_eq!(code, EXIT_NUMERICAL);
}

#[test]
fn binary_exit_codes_and_thread_cap() {
    let bin = env!("CARGO_BIN_EXE_surrloss");
    let status = Command::new(bin).arg("--help").status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = Command::new(bin).arg("bogus").status().unwrap();
    assert_eq!(status.code(), Some(1));
    let status = Command::new(bin)
        .args(["check", "fisher", "--trials", "2"])
        .env("SURRLOSS_THREADS", "zero")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    let out = Command::new(bin)
        .args(["check", "fisher", "--trials", "2"])
        .env("SURRLOSS_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["command"], "check fisher");
}
