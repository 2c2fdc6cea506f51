use std::path::Path;
use std::process::{Command, Output};

fn tad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tad"))
        .current_dir(dir)
        .env_remove("TAD_SEED")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = tad(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const TABLE: &str = "category,attribute,value,probability
a,x,0,1
a,x,1,0
a,y,0,0.5
a,y,1,0.5
b,x,0,0
b,x,1,1
b,y,0,0.2
b,y,1,0.8
c,x,0,0.3
c,x,1,0.7
c,y,0,1
c,y,1,0
";

fn small_world(dir: &Path) {
    ok(dir, &["synth", "--num-classes", "12", "--num-attributes", "6", "--samples-per-class", "30",
        "--train-classes", "6", "--seed", "3", "--out-dir", "w"]);
    ok(dir, &["sample", "--classes", "w/train_classes.txt", "--num-tasks", "40", "--seed", "1",
        "--pool-tag", "train", "--out", "pool.jsonl"]);
    ok(dir, &["sample", "--classes", "w/novel_classes.txt", "--num-tasks", "30", "--seed", "2",
        "--pool-tag", "novel", "--out", "novel.jsonl"]);
}

#[test]
fn every_output_gets_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_world(d);
    ok(d, &["tad", "--table", "w/table.csv", "--tasks", "novel.jsonl", "--pool", "pool.jsonl",
        "--variant", "orig", "--out", "dist.jsonl"]);
    let m: serde_json::Value = serde_json::from_str(&read(d, "dist.jsonl.manifest.json")).unwrap();
    assert_eq!(m["command"], "tad");
    assert_eq!(m["generator"], "ChaCha8Rng");
    assert_eq!(m["params"]["variant"], "orig");
    let inputs = m["inputs"].as_object().unwrap();
    assert_eq!(inputs.len(), 3);
    assert!(inputs.values().all(|h| h.as_str().unwrap().len() == 64));
    assert!(d.join("w/manifest.json").exists());
    let sm: serde_json::Value = serde_json::from_str(&read(d, "pool.jsonl.manifest.json")).unwrap();
    assert_eq!(sm["seeds"], serde_json::json!([1]));
}

#[test]
fn reruns_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        small_world(d);
        ok(d, &["tad", "--table", "w/table.csv", "--tasks", "novel.jsonl", "--pool", "pool.jsonl",
            "--variant", "orig", "--per-pool", "--out", "dist.jsonl"]);
        ok(d, &["evaluate", "--world", "w", "--tasks", "novel.jsonl", "--seed", "5", "--out", "acc.jsonl"]);
    }
    for name in ["w/features.csv", "w/table.csv", "pool.jsonl", "novel.jsonl", "dist.jsonl", "acc.jsonl",
        "dist.jsonl.manifest.json"]
    {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
    let d = a.path();
    ok(d, &["tad", "--table", "w/table.csv", "--tasks", "novel.jsonl", "--pool", "pool.jsonl",
        "--variant", "orig", "--per-pool", "--serial", "--out", "serial.jsonl"]);
    assert_eq!(read(d, "dist.jsonl"), read(d, "serial.jsonl"));
}

#[test]
fn seed_comes_from_env_then_config_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("classes.txt"), "a\nb\nc\nd\ne\nf\n").unwrap();
    let sample = |seed_env: Option<&str>, extra: &[&str], out: &str| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_tad"));
        cmd.current_dir(d).env_remove("TAD_SEED");
        if let Some(s) = seed_env {
            cmd.env("TAD_SEED", s);
        }
        let mut args = vec!["sample", "--classes", "classes.txt", "--ways", "3", "--num-tasks", "20"];
        args.extend_from_slice(extra);
        args.extend(["--out", out]);
        assert!(cmd.args(&args).status().unwrap().success());
        read(d, out)
    };
    let explicit7 = sample(None, &["--seed", "7"], "s7.jsonl");
    let explicit8 = sample(None, &["--seed", "8"], "s8.jsonl");
    assert_ne!(explicit7, explicit8);
    assert_eq!(sample(Some("7"), &[], "env.jsonl"), explicit7);

    std::fs::write(d.join("run.cfg"), "# defaults\nseed = 8\nways = 3\n").unwrap();
    assert_eq!(sample(Some("7"), &["--config", "run.cfg"], "cfg.jsonl"), explicit8);
    assert_eq!(sample(None, &["--config", "run.cfg", "--seed", "7"], "flag.jsonl"), explicit7);
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "category,attribute,value,probability\na,x,0,0.7\na,x,1,0.7\n").unwrap();
    let out = tad(d, &["ingest", "--table", "bad.csv", "--out", "o.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("o.csv.manifest.json").exists());

    let out = tad(d, &["sample", "--num-tasks", "3", "--out", "t.jsonl"]);
    assert_eq!(out.status.code(), Some(2), "no class source");

    let out = tad(d, &["tad", "--variant", "sideways", "--table", "x", "--tasks", "y", "--pool", "z", "--out", "o"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn infeasible_requests_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.csv"), TABLE).unwrap();
    std::fs::write(d.join("novel.jsonl"), "{\"id\":\"n\",\"categories\":[\"a\",\"b\"],\"pool\":\"t\"}\n").unwrap();
    std::fs::write(d.join("pool.jsonl"), "{\"id\":\"p\",\"categories\":[\"a\",\"b\",\"c\"],\"pool\":\"t\"}\n").unwrap();
    let args = ["tad", "--table", "t.csv", "--tasks", "novel.jsonl", "--pool", "pool.jsonl"];
    let out = tad(d, &[&args[..], &["--variant", "approx", "--out", "o.jsonl"]].concat());
    assert_eq!(out.status.code(), Some(3));
    // The matched form handles unequal sizes.
    ok(d, &[&args[..], &["--variant", "orig", "--out", "o.jsonl"]].concat());

    ok(d, &["synth", "--num-classes", "4", "--num-attributes", "17", "--train-classes", "2",
        "--samples-per-class", "1", "--out-dir", "w"]);
    let out = tad(d, &["lemma-check", "--table", "w/table.csv", "--out", "l.jsonl"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn lemma_check_and_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("t.csv"), TABLE).unwrap();
    ok(d, &["lemma-check", "--table", "t.csv", "--out", "l.jsonl"]);
    let lines: Vec<serde_json::Value> =
        read(d, "l.jsonl").lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for l in &lines {
        assert_eq!(l["holds"], true);
        assert_eq!(l["delta"], 2.0);
    }
    ok(d, &["ingest", "--table", "t.csv", "--out", "copy.csv"]);
    ok(d, &["ingest", "--table", "copy.csv", "--out", "copy2.csv"]);
    assert_eq!(read(d, "copy.csv"), read(d, "copy2.csv"));
}

#[test]
fn analysis_pipeline_runs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_world(d);
    ok(d, &["tad", "--table", "w/table.csv", "--tasks", "novel.jsonl", "--pool", "pool.jsonl", "--out", "dist.jsonl"]);
    ok(d, &["evaluate", "--world", "w", "--tasks", "novel.jsonl", "--out", "acc.jsonl"]);
    ok(d, &["analyze", "--distances", "dist.jsonl", "--accuracies", "acc.jsonl", "--min-count", "2",
        "--bins-out", "bins.csv", "--out", "summary.json"]);
    let summary: serde_json::Value = serde_json::from_str(&read(d, "summary.json")).unwrap();
    assert_eq!(summary["tasks"], 30);
    assert!(read(d, "bins.csv").starts_with("lo,hi,midpoint,count,mean_accuracy,ci95,sparse"));

    ok(d, &["select", "--distances", "dist.jsonl", "--fraction", "0.1", "--out", "sel.jsonl"]);
    assert_eq!(read(d, "sel.jsonl").lines().count(), 3);

    ok(d, &["prune-classes", "--tasks", "pool.jsonl", "--classes", "w/train_classes.txt", "--top-k", "2",
        "--out", "kept.txt"]);
    assert_eq!(read(d, "kept.txt").lines().count(), 4);

    ok(d, &["intervene", "--tasks", "novel.jsonl", "--distances", "dist.jsonl", "--world", "w",
        "--threshold-percentile", "80", "--seeds", "0,1", "--ks", "3,5", "--budget", "10", "--out", "iv.json"]);
    let iv: serde_json::Value = serde_json::from_str(&read(d, "iv.json")).unwrap();
    assert_eq!(iv["per_seed"].as_array().unwrap().len(), 2);
    assert!(iv["intervened_fraction"].as_f64().unwrap() > 0.0);
}

#[test]
fn calibrate_and_evaluate_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_world(d);
    // Split the world's features into training prototypes and a novel support/query.
    let features = read(d, "w/features.csv");
    let mut lines = features.lines();
    let header = lines.next().unwrap().to_string();
    let (mut protos, mut support, mut query) = (vec![header.clone()], vec![header.clone()], vec![header]);
    let mut seen = std::collections::HashMap::new();
    for l in lines {
        let cat = l.split(',').nth(1).unwrap().to_string();
        let idx: usize = cat[1..].parse().unwrap();
        let n = seen.entry(cat.clone()).or_insert(0);
        *n += 1;
        if idx < 6 {
            protos.push(l.to_string());
        } else if idx < 11 && *n == 1 {
            support.push(l.to_string());
        } else if idx < 11 && *n <= 4 {
            query.push(l.to_string());
        }
    }
    std::fs::write(d.join("protos.csv"), protos.join("\n") + "\n").unwrap();
    std::fs::write(d.join("support.csv"), support.join("\n") + "\n").unwrap();
    std::fs::write(d.join("query.csv"), query.join("\n") + "\n").unwrap();

    ok(d, &["calibrate", "--train-table", "w/table.csv", "--novel-table", "w/table.csv",
        "--support", "support.csv", "--pool", "pool.jsonl", "--prototypes", "protos.csv",
        "--k-related", "10", "--retain", "2", "--plan-out", "plan.json", "--out", "calibrated.csv"]);
    assert_eq!(read(d, "calibrated.csv").lines().count(), 6);
    let plan: serde_json::Value = serde_json::from_str(&read(d, "plan.json")).unwrap();
    assert_eq!(plan["related"].as_array().unwrap().len(), 10);

    ok(d, &["evaluate", "--support", "calibrated.csv", "--query", "query.csv", "--temperature", "0.1",
        "--out", "eval.json"]);
    let ev: serde_json::Value = serde_json::from_str(&read(d, "eval.json")).unwrap();
    assert_eq!(ev["queries"].as_array().unwrap().len(), 15);
    let acc = ev["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}
