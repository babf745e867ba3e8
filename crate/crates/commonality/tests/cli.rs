use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use commonality::pipeline::artifacts;

fn fixture_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/filtered/run.json")
}

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commonality"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], out: &Path) {
    let o = cli(args, out);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.insert(
                    path.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    files
}

fn error_json(o: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&o.stderr);
    let last = stderr.lines().last().expect("an error line");
    serde_json::from_str(last).unwrap_or_else(|e| panic!("not JSON ({e}): {last}"))
}

#[test]
fn pipeline_is_byte_identical_and_matches_stages() {
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    ok(&["--config", cfg, "pipeline"], a.path());
    ok(&["--config", cfg, "pipeline"], b.path());
    for stage in ["ingest", "train", "index", "retrieve", "verify", "commonalities"] {
        ok(&["--config", cfg, stage], c.path());
    }
    let ta = tree(a.path());
    assert!(ta.contains_key(Path::new(artifacts::COMMONALITY_TSV)));
    assert!(!ta.contains_key(Path::new(artifacts::LOCK)));
    assert_eq!(ta, tree(b.path()));
    assert_eq!(ta, tree(c.path()));
}

#[test]
fn table_rows_drop_discarded_concepts() {
    let out = tempfile::tempdir().unwrap();
    ok(
        &["--config", fixture_config().to_str().unwrap(), "pipeline"],
        out.path(),
    );
    let table = std::fs::read_to_string(out.path().join(artifacts::COMMONALITY_TSV)).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in commonality::fixtures::FILTERED_ROWS {
        let line = rows.iter().find(|r| r[0] == row.property).expect("row present");
        let concepts: Vec<&str> = line[1].split(',').collect();
        assert!(concepts.len() >= 2);
        for d in row.discarded {
            assert!(!concepts.contains(d), "{d} kept under {}", row.property);
        }
    }
}

#[test]
fn exit_codes_and_error_lines() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();

    let o = cli(&["--config", cfg, "--lambda", "2", "verify"], out.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["error"], "validation");

    let o = cli(&["--config", cfg, "verify"], out.path());
    assert_eq!(o.status.code(), Some(2));
    let e = error_json(&o);
    assert_eq!(e["error"], "io");
    assert_eq!(e["stage"], "verify");

    let o = cli(&["frobnicate"], out.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_json(&o)["stage"], "args");

    let o = cli(&["--pairs", "/nonexistent/pairs.tsv", "ingest"], out.path());
    assert_eq!(o.status.code(), Some(1));

    assert!(cli(&["--help"], out.path()).status.success());
}

#[test]
fn held_lock_blocks_a_second_run() {
    let out = tempfile::tempdir().unwrap();
    let lock = out.path().join(artifacts::LOCK);
    std::fs::write(&lock, "12345\n").unwrap();
    let o = cli(&["--config", fixture_config().to_str().unwrap(), "ingest"], out.path());
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&lock).unwrap(), "12345\n");
    assert!(!out.path().join(artifacts::PAIRS).exists());
}

fn candidate_counts(out: &Path) -> BTreeMap<String, usize> {
    let text = std::fs::read_to_string(out.join(artifacts::CANDIDATES)).unwrap();
    let mut counts = BTreeMap::new();
    for line in text.lines() {
        *counts.entry(line.split('\t').next().unwrap().to_string()).or_default() += 1;
    }
    counts
}

#[test]
fn retrieve_defaults_to_fifty_candidates() {
    // 30 concepts over 60 properties, each property held by 10 concepts
    let dir = tempfile::tempdir().unwrap();
    let pairs = dir.path().join("pairs.tsv");
    let mut text = String::new();
    for c in 0..30 {
        for j in 0..20 {
            text.push_str(&format!("concept {c}\tproperty {}\n", (2 * c + j) % 60));
        }
    }
    std::fs::write(&pairs, text).unwrap();
    let out = dir.path().join("out");
    let p = pairs.to_str().unwrap();
    for stage in ["ingest", "train", "index", "retrieve"] {
        ok(&["--pairs", p, "--seed", "1", stage], &out);
    }
    let counts = candidate_counts(&out);
    assert_eq!(counts.len(), 30);
    assert!(counts.values().all(|&n| n == 50));

    // fewer properties than the default depth: every property comes back
    let small = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    for stage in ["ingest", "train", "index", "retrieve"] {
        ok(&["--config", cfg.to_str().unwrap(), stage], small.path());
    }
    assert!(candidate_counts(small.path()).values().all(|&n| n == 6));

    ok(&["--pairs", p, "--top-k", "7", "retrieve"], &out);
    assert!(candidate_counts(&out).values().all(|&n| n == 7));
}

#[test]
fn verifier_modes_from_the_command_line() {
    let out = tempfile::tempdir().unwrap();
    let cfg = fixture_config();
    let cfg = cfg.to_str().unwrap();
    ok(&["--config", cfg, "pipeline"], out.path());
    let external = std::fs::read_to_string(out.path().join(artifacts::ASSIGNMENT)).unwrap();

    ok(&["--config", cfg, "--verifier", "builtin", "verify"], out.path());
    assert!(out.path().join(artifacts::VERIFIER_MODEL).exists());
    ok(
        &["--config", cfg, "--verifier", "passthrough", "--lambda", "0", "verify"],
        out.path(),
    );
    let all = std::fs::read_to_string(out.path().join(artifacts::ASSIGNMENT)).unwrap();
    let pairs = |s: &str| -> usize {
        s.lines()
            .map(|l| {
                serde_json::from_str::<serde_json::Value>(l).unwrap()["properties"]
                    .as_array()
                    .unwrap()
                    .len()
            })
            .sum()
    };
    assert_eq!(
        pairs(&all),
        std::fs::read_to_string(out.path().join(artifacts::CANDIDATES))
            .unwrap()
            .lines()
            .count()
    );
    assert!(pairs(&external) < pairs(&all));
}

#[test]
fn show_config_reflects_flags() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(
        &[
            "--config",
            fixture_config().to_str().unwrap(),
            "--top-k",
            "9",
            "show-config",
        ],
        out.path(),
    );
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["retrieval"]["top_k"], 9);
    assert_eq!(v["seed"], 13);
}
