//! End-to-end runs of the `prospector` binary over a toy dataset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_prospector"))
}

fn run_ok(args: &[&str]) -> Output {
    let output = bin().args(args).output().expect("run prospector");
    assert!(
        output.status.success(),
        "command {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

struct Workspace {
    #[allow(dead_code)]
    dir: tempfile::TempDir,
    root: PathBuf,
    config: PathBuf,
    dataset: PathBuf,
}

fn setup() -> Workspace {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().to_path_buf();

    let records: Vec<String> = (0..20)
        .map(|i| {
            format!(
                r#"{{"instruction":"explain topic {i}","input":"","output":"topic {i} means {}"}}"#,
                ["alpha", "beta", "gamma", "delta"][i % 4]
            )
        })
        .collect();
    let dataset = root.join("dataset.json");
    fs::write(&dataset, format!("[{}]", records.join(","))).unwrap();

    fs::write(
        root.join("corpus.txt"),
        "explain topic alpha beta gamma delta means answer reply question text",
    )
    .unwrap();

    let config = root.join("config.toml");
    fs::write(
        &config,
        format!(
            r#"
dataset = "{dataset}"
format = "alpaca_json"
cache_dir = "{cache}"
parallelism = 2
seed = 7

[template]
task_block = "Q: {{instruction}}\nA:"
demo_block = " [{{instruction}} -> {{output}}]"
demo_position = "after_task"

[scorer]
kind = "bigram"
corpus = "{corpus}"

[reward]
kind = "stub"
stub = "content_hash"

[embedder]
kind = "hashing"
dim = 32

[refinement]
pool_size = 12
elite_size = 2
coreset_size = 3
"#,
            dataset = dataset.display(),
            cache = root.join("cache").display(),
            corpus = root.join("corpus.txt").display(),
        ),
    )
    .unwrap();

    Workspace {
        dir,
        root,
        config,
        dataset,
    }
}

fn manifest(path: &Path) -> serde_json::Value {
    let mut name = path.file_name().unwrap().to_os_string();
    name.push(".manifest.json");
    let text = fs::read_to_string(path.with_file_name(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn line_count(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

#[test]
fn refine_prospect_export_overlap_report_pipeline() {
    let ws = setup();
    let config = ws.config.to_str().unwrap();

    // refine: 2 elite + 3 coreset tasks
    let tasks = ws.root.join("tasks.jsonl");
    run_ok(&["refine", "--config", config, "--output", tasks.to_str().unwrap()]);
    assert_eq!(line_count(&tasks), 5);
    let refine_manifest = manifest(&tasks);
    assert_eq!(refine_manifest["mode"], "refined");
    assert_eq!(refine_manifest["task_count"], 5);
    assert_eq!(refine_manifest["elite_ids"].as_array().unwrap().len(), 2);
    assert_eq!(refine_manifest["coreset_ids"].as_array().unwrap().len(), 3);

    // prospect, cold cache: 5 zero-shot + 20 x 5 one-shot calls
    let scores = ws.root.join("scores.jsonl");
    run_ok(&[
        "prospect",
        "--config",
        config,
        "--tasks",
        tasks.to_str().unwrap(),
        "--output",
        scores.to_str().unwrap(),
    ]);
    assert_eq!(line_count(&scores), 20);
    let cold = manifest(&scores);
    assert_eq!(cold["zero_shot_calls"], 5);
    assert_eq!(cold["one_shot_calls"], 100);
    assert_eq!(cold["total_calls"], 105);
    assert_eq!(cold["cache_hits"], 0);

    // warm rerun: zero calls, identical bytes
    let first_bytes = fs::read(&scores).unwrap();
    run_ok(&[
        "prospect",
        "--config",
        config,
        "--tasks",
        tasks.to_str().unwrap(),
        "--output",
        scores.to_str().unwrap(),
    ]);
    let warm = manifest(&scores);
    assert_eq!(warm["zero_shot_calls"], 0);
    assert_eq!(warm["one_shot_calls"], 0);
    assert_eq!(warm["cache_hits"], 20);
    assert_eq!(fs::read(&scores).unwrap(), first_bytes);

    // export top 25% -> 5 records plus sidecar
    let subset = ws.root.join("top25.json");
    run_ok(&[
        "export",
        "--scores",
        scores.to_str().unwrap(),
        "--dataset",
        ws.dataset.to_str().unwrap(),
        "--fraction",
        "0.25",
        "--direction",
        "top",
        "--output",
        subset.to_str().unwrap(),
    ]);
    let exported: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&subset).unwrap()).unwrap();
    assert_eq!(exported.as_array().unwrap().len(), 5);
    let sidecar = ws.root.join("top25.json.scores.jsonl");
    assert_eq!(line_count(&sidecar), 5);
    let first_line: serde_json::Value = serde_json::from_str(
        fs::read_to_string(&sidecar).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    assert!(first_line.get("golden_score").is_some());
    assert_eq!(first_line["m"], 5);

    // overlap of a scores file with a copy of itself: fraction 1
    let scores_b = ws.root.join("scores_b.jsonl");
    fs::copy(&scores, &scores_b).unwrap();
    let matrix_path = ws.root.join("overlap.csv");
    let output = run_ok(&[
        "overlap",
        "--scores",
        scores.to_str().unwrap(),
        "--scores",
        scores_b.to_str().unwrap(),
        "--fraction",
        "0.3",
        "--output",
        matrix_path.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("scores vs scores_b: 1.0000"), "stdout: {stdout}");
    let matrix = fs::read_to_string(&matrix_path).unwrap();
    assert_eq!(matrix.lines().count(), 3);
    assert!(matrix.starts_with("label,scores,scores_b\n"));

    // report emits the standard files
    let report_dir = ws.root.join("report");
    run_ok(&[
        "report",
        "--scores",
        scores.to_str().unwrap(),
        "--scores",
        scores_b.to_str().unwrap(),
        "--fraction",
        "0.3",
        "--out-dir",
        report_dir.to_str().unwrap(),
    ]);
    for file in ["gs_histogram.csv", "selections.csv", "overlap_matrix.csv", "summary.txt"] {
        assert!(report_dir.join(file).exists(), "missing {file}");
    }
}

#[test]
fn refine_random_is_seed_stable() {
    let ws = setup();
    let config = ws.config.to_str().unwrap();
    let a = ws.root.join("random_a.jsonl");
    let b = ws.root.join("random_b.jsonl");
    run_ok(&[
        "refine", "--config", config, "--random", "5", "--output", a.to_str().unwrap(),
    ]);
    run_ok(&[
        "refine", "--config", config, "--random", "5", "--output", b.to_str().unwrap(),
    ]);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(line_count(&a), 5);
    assert_eq!(manifest(&a)["mode"], "random");

    let c = ws.root.join("random_c.jsonl");
    run_ok(&[
        "refine", "--config", config, "--random", "5", "--seed", "99",
        "--output", c.to_str().unwrap(),
    ]);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn template_change_invalidates_the_cache() {
    let ws = setup();
    let config = ws.config.to_str().unwrap();
    let tasks = ws.root.join("tasks.jsonl");
    run_ok(&["refine", "--config", config, "--random", "3", "--output", tasks.to_str().unwrap()]);
    let scores = ws.root.join("scores.jsonl");
    let prospect = |cfg: &str, out: &Path| {
        run_ok(&[
            "prospect", "--config", cfg, "--tasks", tasks.to_str().unwrap(),
            "--output", out.to_str().unwrap(),
        ]);
    };
    prospect(config, &scores);
    assert_eq!(manifest(&scores)["one_shot_calls"], 60);

    // same cache dir, different template: full recompute
    let altered = ws.root.join("config_altered.toml");
    let text = fs::read_to_string(&ws.config)
        .unwrap()
        .replace("demo_position = \"after_task\"", "demo_position = \"before_task\"");
    fs::write(&altered, text).unwrap();
    let scores2 = ws.root.join("scores2.jsonl");
    prospect(altered.to_str().unwrap(), &scores2);
    let m = manifest(&scores2);
    assert_eq!(m["one_shot_calls"], 60);
    assert_eq!(m["cache_hits"], 0);
}

#[test]
fn cost_reproduces_published_arithmetic() {
    let output = run_ok(&["cost", "52002", "1000"]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("52054002"), "stdout: {stdout}");

    let output = run_ok(&["cost", "52002", "100"]);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("5252202"), "stdout: {stdout}");
}

#[test]
fn usage_errors_exit_with_code_2() {
    let ws = setup();
    // fraction 0 is a usage error
    let scores = ws.root.join("missing-scores.jsonl");
    fs::write(&scores, "{\"example_id\":0,\"golden_score\":0.0,\"wins\":0,\"m\":1,\"one_shot_scores\":[-1.0]}\n").unwrap();
    let output = bin()
        .args([
            "export",
            "--scores",
            scores.to_str().unwrap(),
            "--dataset",
            ws.dataset.to_str().unwrap(),
            "--fraction",
            "0",
            "--direction",
            "top",
            "--output",
            ws.root.join("out.json").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn offline_forbids_network_backends() {
    let ws = setup();
    let text = fs::read_to_string(&ws.config).unwrap().replace(
        "kind = \"bigram\"",
        "kind = \"http\"\nendpoint = \"http://127.0.0.1:1/score\"",
    );
    let altered = ws.root.join("config_http.toml");
    fs::write(&altered, text).unwrap();
    let output = bin()
        .args([
            "refine",
            "--config",
            altered.to_str().unwrap(),
            "--offline",
            "--output",
            ws.root.join("tasks.jsonl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("--offline"), "stderr: {stderr}");
}

#[test]
fn data_errors_exit_with_code_3() {
    let ws = setup();
    let bad = ws.root.join("bad.json");
    fs::write(&bad, "[{\"instruction\": 42}]").unwrap();
    let output = bin()
        .args([
            "refine",
            "--config",
            ws.config.to_str().unwrap(),
            "--dataset",
            bad.to_str().unwrap(),
            "--random",
            "1",
            "--output",
            ws.root.join("t.jsonl").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));
}
