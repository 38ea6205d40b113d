use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use shiftscope_core::embedio;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_shiftscope"));
    cmd.env_remove("SHIFTSCOPE_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small labeled cluster set: 6 classes x 120 points in 16 dimensions.
fn clusters(dir: &Path) -> PathBuf {
    let path = dir.join("clusters.embv1");
    let out = run(&[
        "gen",
        "clusters",
        "--classes",
        "6",
        "--per-class",
        "120",
        "--dim",
        "16",
        "--seed",
        "1",
        "--out",
        p(&path),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    path
}

fn strip_times(v: &mut Value) {
    if let Value::Object(map) = v {
        map.retain(|k, _| !k.starts_with("elapsed"));
        map.values_mut().for_each(strip_times);
    }
}

#[test]
fn gen_clusters_matches_requested_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.embv1");
    let out = run(&[
        "gen",
        "clusters",
        "--classes",
        "10",
        "--per-class",
        "700",
        "--dim",
        "128",
        "--sep",
        "6",
        "--out",
        p(&path),
    ]);
    assert_eq!(code(&out), 0);
    let set = embedio::load(&path, None).unwrap();
    assert_eq!((set.len(), set.dim()), (7000, 128));
    assert_eq!(set.classes().unwrap(), (0..10).collect::<Vec<u32>>());
}

#[test]
fn self_comparison_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let npy = dir.path().join("a.npy");
    embedio::save(&embedio::load(&data, None).unwrap(), &npy).unwrap();
    let out = run(&[
        "detect",
        p(&npy),
        p(&npy),
        "--metric",
        "local-energy",
        "--seed",
        "7",
        "--subsample-size",
        "100",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["decision"], "no");
    assert_eq!(v["config"]["metric"]["name"], "local-energy");
    assert_eq!(v["config"]["seed"]["seed"], 7);
    assert_eq!(v["inputs"]["normalized"], true);
}

#[test]
fn domain_pair_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let (a, b) = (dir.path().join("a.embv1"), dir.path().join("b.embv1"));
    let out = run(&[
        "gen",
        "domain",
        "--input",
        p(&data),
        "--classes-a",
        "0-2",
        "--classes-b",
        "3-5",
        "--out-reference",
        p(&a),
        "--out-candidate",
        p(&b),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let ra = embedio::load(&a, None).unwrap().classes().unwrap();
    let rb = embedio::load(&b, None).unwrap().classes().unwrap();
    assert_eq!((ra, rb), (vec![0, 1, 2], vec![3, 4, 5]));

    let report = dir.path().join("r.json");
    let out = run(&[
        "detect",
        p(&a),
        p(&b),
        "--subsample-size",
        "50",
        "--out",
        p(&report),
    ]);
    assert_eq!(code(&out), 3);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["decision"], "yes");
    assert_eq!(v["fit_score"], 1.0);
}

#[test]
fn perturbation_report_has_a_bounded_curve() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let out = run(&[
        "detect",
        p(&data),
        p(&data),
        "--test",
        "perturbation",
        "--threshold",
        "0.80",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["test"], "perturbation");
    let curve = v["criteria_curve"].as_array().unwrap();
    assert!(!curve.is_empty() && curve.len() <= 10);
    assert_eq!(v["config"]["perturb"]["threshold"], 0.8);
}

#[test]
fn subpop_thins_the_chosen_classes() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let out = run(&[
        "gen",
        "subpop",
        "--input",
        p(&data),
        "--classes-a",
        "0-2",
        "--fractions-a",
        "0.1",
        "--out-reference",
        p(&a),
        "--out-candidate",
        p(&b),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let count = |path: &Path, class: u32| {
        let set = embedio::load(path, Some("label")).unwrap();
        set.labels()
            .unwrap()
            .iter()
            .filter(|&&l| l == class)
            .count()
    };
    // Halves hold about 60 points per class; 10% of them survive.
    assert!(count(&a, 0) <= 8 && count(&a, 4) >= 40);
    assert!(count(&b, 4) <= 8 && count(&b, 0) >= 40);
}

#[test]
fn dirichlet_gen_keeps_labels() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let out_path = dir.path().join("d.embv1");
    let out = run(&[
        "gen",
        "dirichlet",
        "--input",
        p(&data),
        "--out",
        p(&out_path),
    ]);
    assert_eq!(code(&out), 0);
    let set = embedio::load(&out_path, None).unwrap();
    assert!(set.len() < 720 && set.labels().is_some());
}

#[test]
fn missing_input_exits_one_without_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let report = dir.path().join("r.json");
    let missing = dir.path().join("missing.npy");
    let out = run(&["detect", p(&missing), p(&data), "--out", p(&report)]);
    assert_eq!(code(&out), 1);
    assert!(!report.exists());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.npy"));
}

#[test]
fn config_violations_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let out = run(&["detect", p(&data), p(&data), "--alpha", "1.5"]);
    assert_eq!(code(&out), 2);
    let out = run(&[
        "detect",
        p(&data),
        p(&data),
        "--metric",
        "local-energy",
        "--k",
        "0",
    ]);
    assert_eq!(code(&out), 2);
    // 720 rows cannot hold two disjoint subsamples of 1000.
    let out = run(&["detect", p(&data), p(&data)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unlabeled_input_for_label_shifts_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let npy = dir.path().join("bare.npy");
    embedio::save(&embedio::load(&data, None).unwrap(), &npy).unwrap();
    let (a, b) = (dir.path().join("a.embv1"), dir.path().join("b.embv1"));
    for kind in ["subpop", "domain"] {
        let out = run(&[
            "gen",
            kind,
            "--input",
            p(&npy),
            "--out-reference",
            p(&a),
            "--out-candidate",
            p(&b),
        ]);
        assert_eq!(code(&out), 2, "{kind}");
    }
    let out = run(&["ablate", p(&npy)]);
    assert_eq!(code(&out), 2);
}

#[test]
fn repeated_runs_give_identical_json() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let args = [
        "detect",
        p(&data),
        p(&data),
        "--subsample-size",
        "80",
        "--runs",
        "5",
        "--seed",
        "11",
    ];
    let mut a: Value = serde_json::from_slice(&run(&args).stdout).unwrap();
    let mut b: Value = serde_json::from_slice(&run(&args).stdout).unwrap();
    strip_times(&mut a);
    strip_times(&mut b);
    assert_eq!(a, b);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let base = [
        "detect",
        p(&data),
        p(&data),
        "--subsample-size",
        "80",
        "--runs",
        "3",
    ];
    let mut flagged = base.to_vec();
    flagged.extend(["--seed", "42"]);
    let mut a: Value = serde_json::from_slice(&run(&flagged).stdout).unwrap();
    let env_out = bin()
        .args(base)
        .env("SHIFTSCOPE_SEED", "42")
        .output()
        .unwrap();
    let mut b: Value = serde_json::from_slice(&env_out.stdout).unwrap();
    strip_times(&mut a);
    strip_times(&mut b);
    assert_eq!(a["config"]["seed"]["seed"], 42);
    assert_eq!(a, b);
}

#[test]
fn table_and_csv_formats() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let common = [
        "detect",
        p(&data),
        p(&data),
        "--subsample-size",
        "80",
        "--runs",
        "3",
    ];
    let mut table = common.to_vec();
    table.extend(["--format", "table"]);
    let out = run(&table);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("Shift Test"));
    assert!(text.contains("S-E") && text.contains("(0:3)"));
    let mut csv = common.to_vec();
    csv.extend(["--format", "csv"]);
    let text = String::from_utf8(run(&csv).stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn diagrams_can_be_exported() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let out_dir = dir.path().join("dgm");
    let out = run(&[
        "detect",
        p(&data),
        p(&data),
        "--metric",
        "swp",
        "--subsample-size",
        "60",
        "--runs",
        "2",
        "--samples",
        "2",
        "--export-diagrams",
        p(&out_dir),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(out_dir.join("reference.csv")).unwrap();
    assert!(text.starts_with("dimension,birth,death\n"));
    assert_eq!(text.matches("INF").count(), 1);
    assert!(out_dir.join("candidate.csv").exists());
}

#[test]
fn ablate_emits_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let data = clusters(dir.path());
    let out = run(&[
        "ablate",
        p(&data),
        "--magnitudes",
        "0,0.5,1",
        "--reps",
        "5",
        "--samples",
        "4",
        "--sample-sizes",
        "10,20,40",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sample_size,label_dist_l2,positive_rate,mean_metric"
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r[2])));
    assert_eq!(rows[0][0], 10.0);
}
