use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use optval::formats::{read_manifest, read_samples};

fn optval(args: &[&str], workers: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optval")).args(args).env("OPTVAL_WORKERS", workers).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = optval(args, "1");
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

/// Every file under `dir` keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

#[test]
fn gen_writes_count_files_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--family", "sc", "--count", "6", "--seed", "7", "--out", d.to_str().unwrap()]);
    let files = snapshot(&d);
    assert_eq!(files.keys().filter(|k| k.ends_with(".milp")).count(), 6);
    let (rows, _) = read_manifest(std::str::from_utf8(&files["manifest.tsv"]).unwrap()).unwrap();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| files.contains_key(&r.file) && r.family == "sc"));
}

#[test]
fn mixed_gen_has_equal_shares() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("m");
    ok(&["gen", "--family", "mixed", "--count", "6", "--seed", "2", "--scale", "tiny", "--out", d.to_str().unwrap()]);
    let (rows, _) = read_manifest(&fs::read_to_string(d.join("manifest.tsv")).unwrap()).unwrap();
    for f in ["sc", "ca", "gisp"] {
        assert_eq!(rows.iter().filter(|r| r.family == f).count(), 2);
    }
}

#[test]
fn usage_errors_exit_2() {
    let out = optval(&["gen", "--family", "sc", "--count", "1", "--out", "x", "--bogus"], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(optval(&[], "1").status.code(), Some(2));
    assert_eq!(optval(&["frobnicate"], "1").status.code(), Some(2));
    let out = optval(&["gen", "--family", "sc", "--count", "1", "--out", "x", "--set", "nope=1"], "1");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
    let out = optval(&["gen", "--family", "zz", "--count", "1", "--out", "x"], "1");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_1_and_name_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing");
    let out = optval(&["collect", "--dir", missing.to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage collect failed"));

    // A file of the wrong format is refused.
    let d = tmp.path().join("d");
    ok(&["gen", "--family", "gisp", "--count", "1", "--scale", "tiny", "--out", d.to_str().unwrap()]);
    let milp = fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|x| x == "milp")).unwrap();
    let out = optval(&["eval", "--preds", milp.to_str().unwrap(), "--out", tmp.path().join("r").to_str().unwrap()], "1");
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage eval failed") && err.contains("preds-v1"), "{err}");
}

#[test]
fn config_file_sits_below_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# test\nseed = 5\nscale = tiny\n").unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = tmp.path().join("c");
    ok(&["gen", "--family", "ca", "--count", "2", "--config", cfg.to_str().unwrap(), "--seed", "6", "--out", a.to_str().unwrap()]);
    ok(&["gen", "--family", "ca", "--count", "2", "--scale", "tiny", "--seed", "6", "--out", b.to_str().unwrap()]);
    ok(&["gen", "--family", "ca", "--count", "2", "--config", cfg.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    assert_eq!(snapshot(&a), snapshot(&b));
    assert_ne!(snapshot(&a), snapshot(&c));
}

#[test]
fn single_instance_solve_prints_result_and_log() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("d");
    ok(&["gen", "--family", "gisp", "--count", "1", "--scale", "tiny", "--out", d.to_str().unwrap()]);
    let milp = fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).find(|p| p.extension().is_some_and(|x| x == "milp")).unwrap();
    let log = tmp.path().join("run.events");
    let out = ok(&["solve", "--in", milp.to_str().unwrap(), "--node-limit", "1000", "--log", log.to_str().unwrap()]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("proof=optimal"), "{text}");
    let (events, _) = optval::formats::read_events(&fs::read_to_string(&log).unwrap()).unwrap();
    assert!(matches!(events.last().unwrap().kind, optval_core::tree::EventKind::Finished { .. }));
}

/// Runs every stage by hand on tiny data.
fn stage_run(root: &Path, workers: &str) {
    let s = |p: &str| root.join(p).display().to_string();
    let run = |args: &[&str]| {
        let out = optval(args, workers);
        assert!(out.status.success(), "{args:?}:\n{}", String::from_utf8_lossy(&out.stderr));
    };
    for (split, seed) in [("train", "1"), ("val", "2"), ("test", "3")] {
        let d = s(split);
        run(&["gen", "--family", "gisp", "--sizes", "q2", "--count", "12", "--scale", "tiny", "--seed", seed, "--out", &d]);
        run(&["solve", "--in", &d, "--scale", "tiny"]);
        run(&["collect", "--dir", &d, "--scale", "tiny", "--seed", seed]);
    }
    run(&["train-gnn", "--data", &s("train"), "--val", &s("val"), "--target", "t2", "--scale", "tiny", "--out", &s("m.gnn")]);
    run(&["train-dyn", "--data", &s("train"), "--gnn", &s("m.gnn"), "--scale", "tiny", "--out", &s("m.logit")]);
    run(&["tune-eps", "--data", &s("val"), "--gnn", &s("m.gnn"), "--scale", "tiny", "--out", &s("eps.csv")]);
    let eps = fs::read_to_string(root.join("eps.csv")).unwrap().lines().next().unwrap().split("eps=").nth(1).unwrap().to_string();
    run(&[
        "classify", "--data", &s("test"), "--gnn", &s("m.gnn"), "--logit", &s("m.logit"), "--eps", &eps, "--majority-from", &s("train"),
        "--scale", "tiny", "--out", &s("preds.tsv"),
    ]);
    run(&["eval", "--preds", &s("preds.tsv"), "--gnn", &s("m.gnn"), "--data", &s("test"), "--scale", "tiny", "--out", &s("reports")]);
    run(&["phase-analysis", "--scale", "tiny", "--seed", "4", "--out", &s("phases")]);
}

#[test]
fn stages_chain_and_repeat_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    stage_run(&a, "1");
    stage_run(&b, "3");
    let sa = snapshot(&a);
    assert_eq!(sa, snapshot(&b));
    for key in ["reports/eval.txt", "reports/q1-eval.txt", "phases/phases.csv", "phases/phases-plot.csv", "m.logit", "preds.tsv"] {
        assert!(sa.contains_key(key), "missing {key}");
    }
    let (samples, _) = read_samples(std::str::from_utf8(&sa["train/samples.dyn"]).unwrap()).unwrap();
    assert!(!samples.is_empty());
    assert!(samples.iter().all(|s| s.t > 100));
}

#[test]
fn pipeline_repeats_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (d, w) in [(&a, "1"), (&b, "2")] {
        let out = optval(&["pipeline", "--family", "gisp", "--scale", "tiny", "--seed", "1", "--out", d.to_str().unwrap()], w);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(String::from_utf8_lossy(&out.stdout).contains("C^D"));
    }
    let sa = snapshot(&a);
    assert_eq!(sa, snapshot(&b));
    for key in ["reports/q1.txt", "reports/q1.csv", "reports/q2.txt", "reports/q2.csv", "reports/q2-eps.csv", "reports/q2-importance.csv", "models/q2.logit"] {
        assert!(sa.contains_key(key), "missing {key}");
    }
}
