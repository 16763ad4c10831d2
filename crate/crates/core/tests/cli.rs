//! The `mtcheck` binary on a copy of the offline fixture.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mtcheck::model::load_candidates;
use mtcheck::runner::RunReport;
use serde_json::Value;

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        let dest = to.join(entry.file_name());
        if entry.file_type().unwrap().is_dir() {
            copy_dir(&entry.path(), &dest);
        } else {
            fs::copy(entry.path(), dest).unwrap();
        }
    }
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().join("e2e");
        copy_dir(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/e2e"), &root);
        Fixture { _tmp: tmp, root }
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_mtcheck"))
            .args(args)
            .current_dir(&self.root)
            .output()
            .unwrap()
    }

    fn ok(&self, args: &[&str]) -> String {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "mtcheck {args:?} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
        String::from_utf8(out.stdout).unwrap()
    }

    fn prepared() -> Self {
        let f = Fixture::new();
        f.ok(&["generate", "--config", "run.toml"]);
        f.ok(&["candidates", "--config", "run.toml"]);
        f
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }
}

fn code(out: &Output) -> Option<i32> {
    out.status.code()
}

#[test]
fn generate_writes_suite_and_log() {
    let f = Fixture::new();
    f.ok(&["generate", "--config", "run.toml", "--property", "names"]);
    let suite = fs::read_to_string(f.path("workspace/names/suite.jsonl")).unwrap();
    assert_eq!(suite.lines().count(), 12);
    assert!(!suite.contains("\r\n"));
    let log: Value = serde_json::from_str(&fs::read_to_string(f.path("workspace/names/genlog.json")).unwrap()).unwrap();
    let emitted = log["batches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["emitted"].as_u64().unwrap())
        .sum::<u64>();
    let kept = log["batches"]
        .as_array()
        .unwrap()
        .iter()
        .map(|b| b["kept"].as_u64().unwrap())
        .sum::<u64>();
    assert_eq!(kept, 12);
    assert!(emitted > kept);
    assert!(!f.path("workspace/currencies/suite.jsonl").exists());
}

#[test]
fn candidates_record_unanswerable_values() {
    let f = Fixture::prepared();
    let entries = load_candidates(&f.path("workspace/currencies/candidates.jsonl")).unwrap();
    assert!(!entries.is_empty());
    let unanswered = fs::read_to_string(f.path("workspace/currencies/unanswered.jsonl")).unwrap();
    assert!(unanswered.contains("XAU"), "{unanswered}");
    let idioms = load_candidates(&f.path("workspace/idioms/candidates.jsonl")).unwrap();
    assert!(idioms
        .iter()
        .all(|e| e.kind() == mtcheck::model::DetectorKind::Contrastive));
}

#[test]
fn run_writes_reports_and_reuses_the_cache() {
    let f = Fixture::prepared();
    let stdout = f.ok(&["run", "--config", "run.toml", "--out", "r1"]);
    assert!(stdout.contains("Macro pass rate intervals"), "{stdout}");
    for file in [
        "verdicts.jsonl",
        "report.json",
        "report.txt",
        "run_meta.json",
        "translations/identity.jsonl",
    ] {
        assert!(f.path("r1").join(file).exists(), "{file} missing");
    }
    let report: RunReport = serde_json::from_str(&fs::read_to_string(f.path("r1/report.json")).unwrap()).unwrap();
    let currencies = report
        .properties
        .iter()
        .find(|p| p.property_id == "currencies")
        .unwrap();
    let by_id = |id: &str| currencies.systems.iter().find(|s| s.system_id == id).unwrap();
    assert_eq!(by_id("identity").mpr, 1.0);
    assert_eq!(by_id("no-codes").mpr, 0.0);
    assert!(currencies.excluded > 0 || currencies.no_candidates > 0);

    let cache = fs::read_to_string(f.path("workspace/cache/translations.jsonl")).unwrap();
    f.ok(&["run", "--config", "run.toml", "--out", "r2"]);
    assert_eq!(
        fs::read_to_string(f.path("workspace/cache/translations.jsonl")).unwrap(),
        cache
    );
    for file in ["verdicts.jsonl", "report.json", "report.txt"] {
        assert_eq!(
            fs::read(f.path("r1").join(file)).unwrap(),
            fs::read(f.path("r2").join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn compare_picks_the_better_system() {
    let f = Fixture::prepared();
    f.ok(&["run", "--config", "run.toml", "--out", "r"]);
    let out = f.ok(&[
        "compare",
        "--config",
        "run.toml",
        "--report",
        "r",
        "--property",
        "currencies",
        "--system",
        "identity",
        "--system",
        "no-codes",
    ]);
    assert!(out.contains("identity") && out.contains("significant"), "{out}");
    assert!(!out.contains("not significant"), "{out}");

    let same = f.ok(&[
        "compare",
        "--config",
        "run.toml",
        "--report",
        "r",
        "--property",
        "names",
        "--system",
        "identity",
        "--system",
        "identity",
    ]);
    assert!(same.contains("0.500") && same.contains("not significant"), "{same}");

    let bad = f.run(&[
        "compare", "--config", "run.toml", "--report", "r", "--system", "nope", "--system", "identity",
    ]);
    assert_eq!(code(&bad), Some(1));
}

#[test]
fn diversity_writes_series() {
    let f = Fixture::prepared();
    f.ok(&[
        "diversity",
        "--suite",
        "workspace/names/suite.jsonl",
        "--n",
        "2",
        "--degree",
        "1",
        "--out",
        "div.json",
    ]);
    let v: Value = serde_json::from_str(&fs::read_to_string(f.path("div.json")).unwrap()).unwrap();
    let values = v["values"].as_array().unwrap();
    assert_eq!(values.len(), 12);
    assert_eq!(values[0].as_f64(), Some(1.0));
    assert_eq!(v["trend"]["coefficients"].as_array().map(Vec::len), Some(2));
}

#[test]
fn annotate_then_apply_edits() {
    let f = Fixture::prepared();
    f.ok(&["run", "--config", "run.toml", "--out", "r"]);
    f.ok(&[
        "annotate",
        "--config",
        "run.toml",
        "--run",
        "r",
        "--sample",
        "3",
        "--out",
        "review.jsonl",
    ]);
    let review = fs::read_to_string(f.path("review.jsonl")).unwrap();
    assert!(review.lines().count() > 0);

    let before = load_candidates(&f.path("workspace/names/candidates.jsonl")).unwrap();
    let value = before[0].value().to_string();
    fs::write(
        f.path("edits.jsonl"),
        format!("{{\"value\": {value:?}, \"add\": [\"Extra-Form\"]}}\n"),
    )
    .unwrap();
    f.ok(&[
        "apply-edits",
        "--config",
        "run.toml",
        "--property",
        "names",
        "--edits",
        "edits.jsonl",
        "--review",
        "review.jsonl",
    ]);
    let after = load_candidates(&f.path("workspace/names/candidates.jsonl")).unwrap();
    let mtcheck::model::CandidateEntry::Exhaustive(set) = &after[0] else {
        panic!("kind changed")
    };
    assert!(set.candidates.iter().any(|c| c == "Extra-Form"));
    let audit = fs::read_to_string(f.path("workspace/names/edit_audit.jsonl")).unwrap();
    assert!(audit.contains("\"add\"") && audit.contains("Extra-Form"));
}

#[test]
fn malformed_edit_file_is_a_data_error() {
    let f = Fixture::prepared();
    fs::write(f.path("edits.jsonl"), "{\"value\": \"x\"}\nnot json\n").unwrap();
    let out = f.run(&[
        "apply-edits",
        "--config",
        "run.toml",
        "--property",
        "names",
        "--edits",
        "edits.jsonl",
    ]);
    assert_eq!(code(&out), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("edits.jsonl:2"));
}

#[test]
fn usage_and_config_errors_exit_1() {
    let f = Fixture::new();
    assert_eq!(code(&f.run(&[])), Some(1));
    assert_eq!(code(&f.run(&["generate", "--config", "missing.toml"])), Some(1));
    assert_eq!(
        code(&f.run(&["generate", "--config", "run.toml", "--property", "nope"])),
        Some(1)
    );
    assert_eq!(code(&f.run(&["run", "--config", "run.toml", "--alpha", "2"])), Some(1));
    assert_eq!(code(&f.run(&["--help"])), Some(0));
}

#[test]
fn run_without_suites_is_a_data_error() {
    let f = Fixture::new();
    assert_eq!(code(&f.run(&["run", "--config", "run.toml", "--out", "r"])), Some(3));
}

#[test]
fn offline_refuses_network_systems() {
    let f = Fixture::prepared();
    let mut cfg = fs::read_to_string(f.path("run.toml")).unwrap();
    cfg.push_str(
        "\n[[systems]]\nsystem_id = \"remote\"\nkind = \"http\"\nendpoint = \"http://127.0.0.1:9/translate\"\nlanguage_pair = { source = \"en\", target = \"de\" }\n",
    );
    fs::write(f.path("net.toml"), cfg).unwrap();
    let out = f.run(&[
        "run",
        "--config",
        "net.toml",
        "--offline",
        "--system",
        "remote",
        "--out",
        "r",
    ]);
    assert_eq!(code(&out), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn partially_failing_system_is_reported_on_the_rest() {
    let f = Fixture::prepared();
    let suite = mtcheck::model::load_suite(&f.path("workspace/names/suite.jsonl")).unwrap();
    let lines: Vec<String> = suite
        .iter()
        .take(5)
        .map(|c| serde_json::json!({"case_id": c.id, "translation": c.source}).to_string())
        .collect();
    fs::write(f.path("partial.jsonl"), lines.join("\n") + "\n").unwrap();
    let mut cfg = fs::read_to_string(f.path("run.toml")).unwrap();
    cfg.push_str("\n[[systems]]\nsystem_id = \"partial\"\nkind = \"file\"\npath = \"partial.jsonl\"\nlanguage_pair = { source = \"en\", target = \"de\" }\n");
    fs::write(f.path("partial.toml"), cfg).unwrap();
    f.ok(&[
        "run",
        "--config",
        "partial.toml",
        "--property",
        "names",
        "--system",
        "identity",
        "--system",
        "partial",
        "--out",
        "r",
    ]);
    let errors = fs::read_to_string(f.path("r/translations/partial.errors.jsonl")).unwrap();
    assert_eq!(errors.lines().count(), suite.len() - 5);
    let report: RunReport = serde_json::from_str(&fs::read_to_string(f.path("r/report.json")).unwrap()).unwrap();
    let names = &report.properties[0];
    assert!(names.systems.iter().all(|s| s.n == 5), "{:?}", names.systems);
}

#[test]
fn system_failing_every_case_is_a_provider_error() {
    let f = Fixture::prepared();
    let mut cfg = fs::read_to_string(f.path("run.toml")).unwrap();
    cfg.push_str("\n[[systems]]\nsystem_id = \"broken\"\nkind = \"command\"\ncommand = [\"false\"]\nlanguage_pair = { source = \"en\", target = \"de\" }\n");
    fs::write(f.path("broken.toml"), cfg).unwrap();
    let out = f.run(&["run", "--config", "broken.toml", "--system", "broken", "--out", "r"]);
    assert_eq!(code(&out), Some(2));
    assert!(f.path("r/translations/broken.errors.jsonl").exists());
}
