use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use exgrasp::mdp::{validate_object, RawObjectSpec};
use exgrasp::ObjectSpec;

fn exgrasp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exgrasp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn pawn() -> ObjectSpec {
    validate_object(RawObjectSpec {
        label: "pawn".into(),
        landing_probs: vec![0.45, 0.3, 0.25],
        grasp_quality: vec![vec![0.6, 0.2, 0.0], vec![0.0, 0.5, 0.1], vec![0.0, 0.0, 0.0]],
        topple_matrix: vec![vec![0.6, 0.4, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]],
        prior_quality: None,
    })
    .unwrap()
}

#[test]
fn gen_object_is_valid_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        let o = exgrasp(&[
            "gen-object", "--family", "sensitivity", "--n", "5", "--k", "100", "--eps", "0.5", "--lambda-min", "0.1",
            "--seed", "7", "--out", path_str(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let spec = ObjectSpec::from_json(&text).unwrap();
    assert_eq!((spec.n_poses(), spec.grasps_per_pose()), (5, 100));

    let random = exgrasp(&["gen-object", "--family", "random", "--n", "4", "--k", "20", "--topple-density", "2",
                           "--topple-mass", "0.2", "--prior-fidelity", "0.5", "--seed", "1"]);
    assert_eq!(code(&random), 0);
    let spec = ObjectSpec::from_json(&String::from_utf8(random.stdout).unwrap()).unwrap();
    assert!(spec.prior_quality().is_some());
}

#[test]
fn gen_object_usage_errors() {
    let o = exgrasp(&["gen-object", "--family", "sensitivity", "--n", "5", "--k", "100", "--lambda-min", "0.1"]);
    assert_eq!(code(&o), 2);
    let bad = exgrasp(&["gen-object", "--family", "sensitivity", "--n", "5", "--k", "100", "--eps", "0",
                        "--lambda-min", "0.1"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn analyze_reports_structure() {
    let dir = tempfile::tempdir().unwrap();
    let obj = dir.path().join("s.json");
    exgrasp(&["gen-object", "--family", "sensitivity", "--n", "5", "--k", "100", "--eps", "0.5", "--lambda-min",
              "0.1", "--seed", "3", "--out", path_str(&obj)]);
    let o = exgrasp(&["analyze", "--object", path_str(&obj), "--json"]);
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["diameter_bound"].as_f64().unwrap(), 20.0);
    assert!((report["diameter"].as_f64().unwrap() - 20.0).abs() <= 1e-6);
    assert!((report["j_star"].as_f64().unwrap() - 0.5).abs() <= 1e-12);

    let single = dir.path().join("one.json");
    exgrasp(&["gen-object", "--family", "sensitivity", "--n", "1", "--k", "4", "--eps", "0.3", "--lambda-min", "1",
              "--out", path_str(&single)]);
    let o = exgrasp(&["analyze", "--object", path_str(&single)]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("diameter: 0\n"));

    let sink = dir.path().join("pawn.json");
    fs::write(&sink, pawn().to_json()).unwrap();
    assert_eq!(code(&exgrasp(&["analyze", "--object", path_str(&sink)])), 0);
    assert_eq!(code(&exgrasp(&["analyze", "--object", path_str(&sink), "--strict"])), 1);
    assert_eq!(code(&exgrasp(&["cover-time", "--object", path_str(&sink), "--episodes", "5"])), 1);
}

#[test]
fn run_writes_one_curve_per_policy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = exgrasp(&["run", "--sensitivity", "n=5,k=100,eps=0.5,lambda=0.1", "--horizon", "300", "--rollouts",
                      "2", "--trials", "2", "--out-dir", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let curves = csv_rows(&out.join("curves.csv"));
    assert_eq!(curves.len(), 3 * 300);
    let policies: std::collections::BTreeSet<_> = curves.iter().map(|r| r[1].clone()).collect();
    assert_eq!(policies.into_iter().collect::<Vec<_>>(), ["oracle", "ts", "ucb"]);
    assert!(curves.iter().all(|r| r[5] == "4"));
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 3);
}

#[test]
fn run_flags_change_preprocessing() {
    let dir = tempfile::tempdir().unwrap();
    let sink = dir.path().join("pawn.json");
    fs::write(&sink, pawn().to_json()).unwrap();
    let summary = |extra: &[&str], name: &str| {
        let out = dir.path().join(name);
        let mut args = vec!["run", "--object", path_str(&sink), "--policies", "oracle", "--horizon", "400",
                            "--rollouts", "1", "--trials", "3", "--out-dir", path_str(&out)];
        args.extend_from_slice(extra);
        let o = exgrasp(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        csv_rows(&out.join("summary.csv")).remove(0)
    };
    // columns: ..., j_star, diameter, diameter_bound, assumption4_violation, epsilon, lambda_min
    let default = summary(&[], "default");
    assert_eq!(default[10], "0.5", "the dead pose is removed, leaving best grasps 0.6 and 0.5");
    let kept = summary(&["--keep-all-poses"], "kept");
    assert_eq!(kept[10], "0");
    assert_eq!(kept[7], "", "diameter undefined with a sink pose");
    let flat = summary(&["--no-toppling"], "flat");
    assert!(flat[9].parse::<f64>().unwrap() <= 0.0);
    assert!(default[9].parse::<f64>().unwrap() > 0.0);
}

#[test]
fn run_reports_failed_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = exgrasp(&["run", "--sensitivity", "n=2,k=3,eps=0.5,lambda=0.2", "--policies", "ts,prior-greedy:0.05",
                      "--horizon", "50", "--rollouts", "1", "--trials", "1", "--out-dir", path_str(&out)]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("failed: sensitivity-n2-k3-eps0.5-lam0.2 / prior-greedy:0.05"));
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 1);
}

#[test]
fn run_reads_config_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"objects":[{"kind":"random","params":{"n_poses":3,"grasps_per_pose":8},"prior_fidelity":0.5}],
            "policies":["ts-prior:5","uniform"],"horizon":100,"rollouts":1,"trials":2,"window":10}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = exgrasp(&["run", "--config", path_str(&cfg), "--out-dir", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("curves.csv")).len(), 200);
    fs::write(&cfg, "{\"objects\": 3}").unwrap();
    assert_eq!(code(&exgrasp(&["run", "--config", path_str(&cfg)])), 2);
}

#[test]
fn sweep_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grid");
    let o = exgrasp(&["sweep", "--grid", "lambda=0.001,0.01,0.1,0.2,eps=0.1,0.25,0.5,0.75,1.0,k=10",
                      "--horizon", "60", "--rollouts", "1", "--trials", "1", "--out-dir", path_str(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&out.join("summary.csv")).len(), 20);
    assert_eq!(code(&exgrasp(&["sweep", "--grid", ""])), 2);
}

#[test]
fn larger_grasp_sets_converge_slower() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k");
    let o = exgrasp(&["sweep", "--grid", "eps=0.5,lambda=0.1,k=10,20,50,100,200", "--horizon", "5000",
                      "--rollouts", "1", "--trials", "10", "--seed", "4", "--out-dir", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let finals: Vec<f64> = csv_rows(&out.join("summary.csv")).iter().map(|r| r[5].parse().unwrap()).collect();
    assert_eq!(finals.len(), 5);
    for pair in finals.windows(2) {
        assert!(pair[1] <= pair[0] + 0.02, "{finals:?}");
    }
    assert!(finals[4] < finals[0] - 0.1, "{finals:?}");
}

#[test]
fn cover_time_reports() {
    let dir = tempfile::tempdir().unwrap();
    let single = dir.path().join("one.json");
    exgrasp(&["gen-object", "--family", "sensitivity", "--n", "1", "--k", "4", "--eps", "0.25", "--lambda-min", "1",
              "--out", path_str(&single)]);
    let o = exgrasp(&["cover-time", "--object", path_str(&single), "--episodes", "20"]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("cover_time_bound: 16\n") && text.contains("cover_time_mc_mean: 1\n"), "{text}");
    assert_eq!(code(&exgrasp(&["cover-time", "--object", path_str(&single), "--episodes", "0"])), 2);
}
