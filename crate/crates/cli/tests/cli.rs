use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use planegen::io::{masked_json, read_document, ResultKind};

const TWO_NETS: &str = r#"{
  "board": {"width": 40.0, "height": 40.0},
  "grid_resolution": 24,
  "nets": [
    {"label": "VCC", "pins": [[8.0, 10.0], [8.0, 30.0]]},
    {"label": "GND", "pins": [[32.0, 10.0], [32.0, 30.0]]}
  ]
}"#;

fn planegen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_planegen")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

fn fast_ga<'a>() -> [&'a str; 6] {
    ["--population", "8", "--elite", "3", "--generations", "4"]
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(planegen(&["--help"]).status.code(), Some(0));
    assert_eq!(planegen(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(planegen(&[]).status.code(), Some(1));
    assert_eq!(planegen(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(planegen(&["solve-gomlp", "p.json", "--seed", "x"]).status.code(), Some(1));
    assert_eq!(planegen(&["solve-multilayer", "p.json", "--layers", "2", "--auto-mcdl"]).status.code(), Some(1));
}

#[test]
fn input_errors_exit_two_with_context() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(planegen(&["solve-astar", missing.to_str().unwrap()]).status.code(), Some(2));

    let bad = write(dir.path(), "bad.json", "{\n  \"board\": {\"width\": 1.0, \"height\": 1.0},\n  \"nets\": [{\"label\": \"A\", \"pins\": [[0.5, true]]}]\n}");
    let out = planegen(&["solve-gomlp", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("nets[0].pins[0][1]"), "{err}");
    assert!(err.contains("line 3"), "{err}");

    let outside = write(dir.path(), "outside.json", r#"{"board": {"width": 1.0, "height": 1.0}, "nets": [{"label": "A", "pins": [[1.5, 0.5]]}]}"#);
    assert_eq!(planegen(&["solve-astar", &outside]).status.code(), Some(2));

    let ok = write(dir.path(), "ok.json", TWO_NETS);
    assert_eq!(planegen(&["solve-gomlp", &ok, "--population", "0"]).status.code(), Some(2));
}

#[test]
fn gomlp_documents_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", TWO_NETS);
    let mut args = vec!["solve-gomlp", &p, "--seed", "7"];
    args.extend(fast_ga());
    let runs: Vec<String> = (0..2)
        .map(|_| {
            let o = planegen(&args);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            String::from_utf8(o.stdout).unwrap()
        })
        .collect();
    assert_eq!(masked_json(&runs[0]).unwrap(), masked_json(&runs[1]).unwrap());

    // --out writes the same document to a file.
    let out = dir.path().join("a.json");
    args.extend(["--out", out.to_str().unwrap()]);
    assert!(planegen(&args).status.success());
    let doc = read_document(&out).unwrap();
    assert_eq!(doc.kind, ResultKind::Gomlp);
    assert_eq!(doc.config["ga"]["rng_seed"], 7);
    assert!(doc.timing.contains_key("total"));
}

#[test]
fn astar_writes_to_stdout_and_renders() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", TWO_NETS);
    let o = planegen(&["solve-astar", &p]);
    assert!(o.status.success());
    let doc_path = write(dir.path(), "astar.json", &String::from_utf8(o.stdout).unwrap());
    let doc = read_document(Path::new(&doc_path)).unwrap();
    assert_eq!(doc.metrics["ei"], 0);

    let svg = dir.path().join("astar.svg");
    let o = planegen(&["render", "--result", &doc_path, "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(svg).unwrap();
    assert!(text.contains("VCC (1 island)") && text.contains("GND (1 island)"));
}

#[test]
fn multilayer_auto_reports_mcdl_and_renders_layers() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", TWO_NETS);
    let out = dir.path().join("ml.json");
    let mut args = vec!["solve-multilayer", &p, "--auto-mcdl", "--metric", "emd", "--linkage", "single", "--out", out.to_str().unwrap()];
    args.extend(fast_ga());
    let o = planegen(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_document(&out).unwrap();
    assert!(doc.result.get("mcdl").is_some());
    assert!(doc.metrics["mcdl"].is_u64());

    let svg = dir.path().join("tree.svg");
    let o = planegen(&["render", "--result", out.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&svg).unwrap().contains("Single linkage"));
    assert!(dir.path().join("tree_layer1.svg").exists());
}

#[test]
fn snapshots_render_one_file_per_generation() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"{
      "board": {"width": 1.0, "height": 1.0}, "grid_resolution": 16,
      "nets": [{"label": "A", "pins": [[0.1, 0.1], [0.9, 0.9]]}, {"label": "B", "pins": [[0.9, 0.1], [0.1, 0.9]]}]
    }"#);
    let out = dir.path().join("g.json");
    let mut args = vec!["solve-gomlp", &p, "--snapshots", "--out", out.to_str().unwrap()];
    args.extend(fast_ga());
    assert!(planegen(&args).status.success());
    let doc = read_document(&out).unwrap();
    let generations = doc.result["generation_snapshots"].as_array().unwrap().len();
    assert_eq!(generations, doc.result["generations_run"].as_u64().unwrap() as usize + 1);

    let snaps = dir.path().join("snaps");
    let o = planegen(&[
        "render", "--result", out.to_str().unwrap(), "--out", dir.path().join("g.svg").to_str().unwrap(),
        "--snapshot-dir", snaps.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_dir(snaps).unwrap().count(), generations);
}

#[test]
fn generated_suite_benchmarks() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let o = planegen(&["gen-problems", "--nets", "3", "--count", "2", "--seed", "4", "--grid", "24", "--out-dir", suite.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read_document(&suite.join("manifest.json")).unwrap();
    assert_eq!(manifest.result, serde_json::json!(["problem_000.json", "problem_001.json"]));

    let again = dir.path().join("again");
    planegen(&["gen-problems", "--nets", "3", "--count", "2", "--seed", "4", "--grid", "24", "--out-dir", again.to_str().unwrap()]);
    assert_eq!(fs::read(suite.join("problem_001.json")).unwrap(), fs::read(again.join("problem_001.json")).unwrap());

    let report = dir.path().join("report.json");
    let mut args = vec!["bench", "--suite-dir", suite.to_str().unwrap(), "--budget", "20", "--report", report.to_str().unwrap()];
    args.extend(fast_ga());
    let o = planegen(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = read_document(&report).unwrap();
    assert_eq!(doc.kind, ResultKind::Benchmark);
    let rows = doc.result["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    let rate = doc.metrics["win_or_tie_rate"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rate));
}

#[test]
fn render_rejects_non_solver_documents() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    planegen(&["gen-problems", "--count", "1", "--out-dir", suite.to_str().unwrap()]);
    let o = planegen(&["render", "--result", suite.join("manifest.json").to_str().unwrap(), "--out", dir.path().join("x.svg").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
