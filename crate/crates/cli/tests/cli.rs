//! End-to-end runs of the `xhoi` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn xhoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xhoi")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = xhoi(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_writes_csv_and_manifest() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "v.csv");
    ok(&["generate", "vstructure-a", "--n", "50", "--p", "2", "--seed", "4", "--out", &csv]);
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x.0,x.1,y.0,y.1,z.0,z.1");
    assert_eq!(lines.count(), 50);
    let manifest = fs::read_to_string(dir.path().join("v.manifest")).unwrap();
    assert_eq!(manifest.lines().collect::<Vec<_>>(), ["x: x.0,x.1", "y: y.0,y.1", "z: z.0,z.1"]);
}

#[test]
fn generate_is_byte_identical_for_a_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.csv"), path(&dir, "b.csv"));
    for out in [&a, &b] {
        ok(&["generate", "xor", "--n", "64", "--d", "4", "--seed", "9", "--out", out]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn test_report_round_trips_and_repeats_exactly() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "x.csv");
    ok(&["generate", "xor", "--n", "256", "--d", "3", "--seed", "1", "--out", &csv]);
    let out = ok(&["test", "--data", &csv, "--test", "streitberg"]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["test"], "streitberg");
    assert_eq!(report["n_total"], 256);
    assert_eq!(report["n_used"], 128);
    assert_eq!(report["subtests"].as_array().unwrap().len(), 3);
    assert_eq!(report["overall_rejected"], true);
    let reparsed: Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(reparsed, report);

    let mut again: Value = serde_json::from_slice(&ok(&["test", "--data", &csv, "--test", "streitberg"]).stdout).unwrap();
    let mut first = report.clone();
    for r in [&mut first, &mut again] {
        r.as_object_mut().unwrap().remove("wall_time_ms");
    }
    assert_eq!(first, again);
}

#[test]
fn permutation_test_honours_seed() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "m.csv");
    ok(&["generate", "mvg", "--n", "100", "--d", "3", "--blocks", "1,2", "--beta", "0.5", "--out", &csv]);
    let run = |seed: &str, name: &str| {
        let out = path(&dir, name);
        ok(&["test", "--data", &csv, "--test", "perm-dhsic", "--perms", "40", "--seed", seed, "--out", &out]);
        let mut v = json(Path::new(&out));
        v.as_object_mut().unwrap().remove("wall_time_ms");
        v
    };
    assert_eq!(run("3", "a.json"), run("3", "b.json"));
}

#[test]
fn bad_cell_is_an_input_error_with_coordinates() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "bad.csv");
    let mut text = String::from("a,b\n");
    for i in 0..20 {
        text += &format!("{i},{}\n", if i == 3 { "oops".to_string() } else { i.to_string() });
    }
    fs::write(&csv, text).unwrap();
    let out = xhoi(&["test", "--data", &csv, "--test", "dhsic"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 5") && err.contains("column 2"), "{err}");
}

#[test]
fn too_few_samples_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "tiny.csv");
    fs::write(&csv, "a,b\n1,2\n3,4\n5,7\n").unwrap();
    let out = xhoi(&["test", "--data", &csv, "--test", "dhsic"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cyclic_candidate_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "d.csv");
    ok(&["generate", "anm-dag", "--n", "60", "--d", "3", "--dag", "1>2", "--out", &csv]);
    let cands = path(&dir, "cands.txt");
    fs::write(&cands, "# candidates\n1>2,2>3\n1>2,2>3,3>1\n").unwrap();
    let out = xhoi(&["dag", "--data", &csv, "--candidates", &cands]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dag_ranks_candidates_against_the_truth_file() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "d.csv");
    ok(&["generate", "anm-dag", "--n", "300", "--d", "3", "--dag", "1>2,2>3", "--seed", "2", "--out", &csv]);
    let truth = path(&dir, "d.dag");
    assert_eq!(fs::read_to_string(&truth).unwrap().trim(), "1>2,2>3");
    let out = path(&dir, "rank.json");
    ok(&["dag", "--data", &csv, "--truth", &truth, "--out", &out]);
    let report = json(Path::new(&out));
    let ranked = report["ranked"].as_array().unwrap();
    assert_eq!(ranked.len(), 6);
    let ps: Vec<f64> = ranked.iter().map(|r| r["p_value"].as_f64().unwrap()).collect();
    assert!(ps.windows(2).all(|w| w[0] >= w[1]), "{ps:?}");
    assert!(ranked.iter().all(|r| r["shd"].as_u64().is_some()));
    assert_eq!(ranked[0]["rank"], 1);
}

#[test]
fn profile_writes_csv_and_json() {
    let dir = TempDir::new().unwrap();
    let csv = path(&dir, "p.csv");
    ok(&["generate", "mvg", "--n", "200", "--d", "4", "--blocks", "1,2", "--beta", "0.8", "--out", &csv]);
    let groups = path(&dir, "groups.txt");
    fs::write(&groups, "left: x1,x2\nright: x3.0,x4\n").unwrap();
    let prefix = path(&dir, "prof");
    ok(&["profile", "--data", &csv, "--groups", &groups, "--orders", "2", "--n-sets", "5", "--out", &prefix]);
    let table = fs::read_to_string(dir.path().join("prof.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "group,order,n_sets,rejections,percentage,warning");
    let left = lines.find(|l| l.starts_with("left,")).unwrap();
    assert!(left.starts_with("left,2,5,5,100"), "{left}");
    let report = json(&dir.path().join("prof.json"));
    assert!(report["rows"].as_array().unwrap().len() >= 3);
}

#[test]
fn bench_writes_the_fixed_schema() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "bench.csv");
    ok(&[
        "bench", "--scenario", "dhsic-vs-perm", "--sizes", "64", "--reps", "2", "--perms", "20", "--out", &out,
    ]);
    let table = fs::read_to_string(&out).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "scenario,n,d,method,mean_ms,std_ms,power");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "{table}");
    assert!(rows.iter().any(|r| r.contains(",permutation-free,")));
    assert!(rows.iter().any(|r| r.contains(",permutation,")));
}
