use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/mini")
}

fn forge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_forge"))
        .args(args)
        .output()
        .expect("forge binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn error_json(o: &Output) -> serde_json::Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line)
        .unwrap_or_else(|e| panic!("stderr is not a JSON report ({e}): {text}"))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// One full fixture run shared by the tests that only read its outputs.
fn shared_run() -> &'static Path {
    static RUN: OnceLock<PathBuf> = OnceLock::new();
    RUN.get_or_init(|| {
        let out = tempfile::tempdir().unwrap().keep();
        let config = fixture().join("forge.toml");
        let o = forge(&["run", "--config", s(&config), "--out", s(&out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    })
}

#[test]
fn full_run_reports_golden_split_counts_and_resumes() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("forge.toml");
    let first = forge(&["run", "--config", s(&config), "--out", s(out.path())]);
    assert_eq!(
        first.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let text = stdout(&first);
    assert!(text.contains("splits: SC=80 UA=18 UC=25"), "{text}");
    for name in [
        "lexicon/nouns.txt",
        "train_parsed.jsonl",
        "test_parsed.jsonl",
        "parser_report.json",
        "index/atoms.txt",
        "index/compounds.txt",
        "splits.jsonl",
        "subgraphs.jsonl",
        "captions.jsonl",
        "hardneg.jsonl",
        "metrics.jsonl",
        "items.jsonl",
        "texts.jsonl",
        "report.csv",
        "report.md",
        "manifests/parse.json",
        "manifests/report.json",
    ] {
        assert!(out.path().join(name).exists(), "missing {name}");
    }
    assert!(!out.path().join(".staging").exists());

    let second = forge(&["run", "--config", s(&config), "--out", s(out.path())]);
    assert!(second.status.success());
    let text = stdout(&second);
    let stage_lines: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with("splits") && !l.starts_with("outputs"))
        .collect();
    assert_eq!(stage_lines.len(), 9, "{text}");
    for line in stage_lines {
        assert!(line.contains("skipped (up-to-date)"), "{line}");
    }

    let forced = forge(&[
        "--force",
        "run",
        "--config",
        s(&config),
        "--out",
        s(out.path()),
        "--stages",
        "index",
    ]);
    assert!(
        stdout(&forced).starts_with("index        ran"),
        "{}",
        stdout(&forced)
    );
}

#[test]
fn seed_change_reruns_selected_stage() {
    let out = tempfile::tempdir().unwrap();
    let config = fixture().join("forge.toml");
    let o = forge(&[
        "run",
        "--config",
        s(&config),
        "--out",
        s(out.path()),
        "--stages",
        "sample",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = forge(&[
        "run",
        "--config",
        s(&config),
        "--out",
        s(out.path()),
        "--stages",
        "sample",
    ]);
    assert!(stdout(&again).contains("skipped (up-to-date)"));
    let reseeded = forge(&[
        "--seed",
        "18",
        "run",
        "--config",
        s(&config),
        "--out",
        s(out.path()),
        "--stages",
        "sample",
    ]);
    assert!(
        stdout(&reseeded).starts_with("sample       ran"),
        "{}",
        stdout(&reseeded)
    );
}

#[test]
fn missing_wordnet_is_a_config_error_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture();
    let config = dir.path().join("forge.toml");
    fs::write(
        &config,
        format!(
            "seed = 1\nout = \"out\"\n[paths]\nscene_graphs = {:?}\nregions = {:?}\ntrain_captions = {:?}\nwordnet = \"no-such-dir\"\n",
            f.join("scene_graphs.json"),
            f.join("region_descriptions.json"),
            f.join("train_captions.tsv"),
        ),
    )
    .unwrap();
    let o = forge(&["run", "--config", s(&config)]);
    assert_eq!(o.status.code(), Some(2));
    let report = error_json(&o);
    assert_eq!(report["status"], "error");
    assert_eq!(report["kind"], "config");
    assert!(report["message"].as_str().unwrap().contains("wordnet"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_stage_input_is_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.jsonl");
    fs::write(
        &train,
        "{\"caption_id\": \"1\", \"text\": \"a dog\"}\n{not json\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = forge(&["index", "--train", s(&train), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let report = error_json(&o);
    assert_eq!(report["stage"], "index");
    assert!(report["message"].as_str().unwrap().contains(":2:"));
    let saved: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("quarantine/index/error.json")).unwrap())
            .unwrap();
    assert_eq!(saved, report);
    assert!(!out.join("index").exists());
    assert!(!out.join("manifests/index.json").exists());
}

#[test]
fn usage_and_missing_input_errors() {
    assert_eq!(forge(&["run", "--bogus"]).status.code(), Some(2));
    assert_eq!(forge(&["frobnicate"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let o = forge(&[
        "report",
        "--metrics",
        s(&dir.path().join("nope.jsonl")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_json(&o)["kind"], "input");
    let o = forge(&[
        "sample",
        "--graphs",
        s(&fixture().join("scene_graphs.json")),
        "--n",
        "1..3",
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn random_scorer_with_fixed_seed_is_reproducible() {
    let run = shared_run();
    let dir = tempfile::tempdir().unwrap();
    let hardneg = run.join("hardneg.jsonl");
    let mut reports = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = forge(&[
            "eval",
            "--hardneg",
            s(&hardneg),
            "--scorers",
            "random",
            "--random-seed",
            "7",
            "--out",
            s(&out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(fs::read(out.join("metrics.jsonl")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert!(!reports[0].is_empty());
}

#[test]
fn standalone_commands_match_the_pipeline() {
    let run = shared_run();
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let ok = |o: Output| assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    ok(forge(&[
        "parse",
        "--graphs",
        s(&f.join("scene_graphs.json")),
        "--regions",
        s(&f.join("region_descriptions.json")),
        "--train",
        s(&f.join("train_captions.tsv")),
        "--out",
        s(d),
    ]));
    ok(forge(&[
        "index",
        "--train",
        s(&d.join("train_parsed.jsonl")),
        "--out",
        s(d),
    ]));
    ok(forge(&[
        "split",
        "--test",
        s(&d.join("test_parsed.jsonl")),
        "--index",
        s(&d.join("index")),
        "--out",
        s(d),
    ]));
    for name in [
        "train_parsed.jsonl",
        "test_parsed.jsonl",
        "index/atoms.txt",
        "index/compounds.txt",
        "splits.jsonl",
    ] {
        assert_eq!(
            fs::read(d.join(name)).unwrap(),
            fs::read(run.join(name)).unwrap(),
            "{name}"
        );
    }

    ok(forge(&[
        "--seed",
        "17",
        "hardneg",
        "--type",
        "atom,comp",
        "--counts",
        "systematicity",
        "--in",
        s(&d.join("splits.jsonl")),
        "--graphs",
        s(&f.join("scene_graphs.json")),
        "--wordnet",
        s(&f.join("wordnet")),
        "--lexicon",
        s(&d.join("lexicon")),
        "--out",
        s(d),
    ]));
    let ours = fs::read_to_string(d.join("hardneg.jsonl")).unwrap();
    let theirs = fs::read_to_string(run.join("hardneg.jsonl")).unwrap();
    let sys: Vec<&str> = theirs
        .lines()
        .filter(|l| l.contains("\"task\":\"systematicity\""))
        .collect();
    assert_eq!(ours.lines().collect::<Vec<_>>(), sys);

    ok(forge(&[
        "report",
        "--metrics",
        s(&run.join("metrics.jsonl")),
        "--out",
        s(d),
    ]));
    assert_eq!(
        fs::read(d.join("report.csv")).unwrap(),
        fs::read(run.join("report.csv")).unwrap()
    );
}

#[test]
fn hardneg_rows_satisfy_their_schema() {
    let run = shared_run();
    let text = fs::read_to_string(run.join("hardneg.jsonl")).unwrap();
    let mut tasks = std::collections::BTreeSet::new();
    for line in text.lines() {
        let row: serde_json::Value = serde_json::from_str(line).unwrap();
        tasks.insert(row["task"].as_str().unwrap().to_string());
        let negs = row["negatives"].as_array().unwrap();
        let requested = row["requested"].as_u64().unwrap();
        assert_eq!(
            negs.len() as u64 + row["shortfall"].as_u64().unwrap(),
            requested
        );
        for n in negs {
            assert_eq!(n["verified"], true);
            assert_ne!(n["text"], row["gt"]);
            assert_eq!(n["hn_type"], row["hn_type"]);
        }
    }
    assert_eq!(
        tasks.into_iter().collect::<Vec<_>>(),
        ["productivity", "systematicity"]
    );
}

#[test]
fn parser_report_is_written() {
    let run = shared_run();
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("parser_report.json")).unwrap()).unwrap();
    assert!(report.is_object());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run.join("manifests/parser-eval.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["counts"]["captions"], 40);
    assert_eq!(manifest["seed"], 17);
}
