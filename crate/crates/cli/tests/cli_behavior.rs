//! Command-line behavior: exit codes, stage subcommands, and configuration
//! precedence.

#[path = "support/mod.rs"]
mod support;

use std::fs;
use std::path::Path;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_review-perturb"))
}

fn corpus() -> std::path::PathBuf {
    support::fixture_root().join("corpus")
}

fn mock_script() -> std::path::PathBuf {
    support::fixture_root().join("mock_script.json")
}

#[test]
fn unknown_subcommand_exits_2() {
    let output = binary().arg("frobnicate").output().unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&output.stderr).is_empty());
}

#[test]
fn bad_flag_exits_2_and_names_it() {
    let output = binary()
        .args(["sample", "--no-such-flag"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("--no-such-flag"));
}

#[test]
fn help_exits_0() {
    let output = binary().arg("--help").output().unwrap();
    assert_eq!(output.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&output.stdout).contains("sample"));
}

#[test]
fn sample_writes_deterministic_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let out_a = tmp.path().join("sample_a.json");
    let out_b = tmp.path().join("sample_b.json");
    for out in [&out_a, &out_b] {
        let output = binary()
            .args(["sample", "--pool"])
            .arg(corpus().join("corpus.json"))
            .args(["--targets", "3,1,1", "--seed", "9", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0), "{:?}", output);
    }
    let a = fs::read_to_string(&out_a).unwrap();
    let b = fs::read_to_string(&out_b).unwrap();
    assert_eq!(a, b);
    let parsed: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(parsed["ids"].as_array().unwrap().len(), 5);
    assert_eq!(parsed["rng_algorithm"], "chacha12/fisher-yates-lemire");
}

#[test]
fn sample_with_oversized_target_exits_1() {
    let output = binary()
        .args(["sample", "--pool"])
        .arg(corpus().join("corpus.json"))
        .args(["--targets", "400,1,1", "--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("insufficient pool"));
}

#[test]
fn classify_sections_prints_relevance_and_warnings() {
    let output = binary()
        .args(["classify-sections", "--corpus"])
        .arg(corpus())
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&output.stdout);
    let method_row = stdout
        .lines()
        .find(|l| l.contains("b01") && l.contains("Method"))
        .expect("table has a Method row");
    assert!(method_row.contains("false") && method_row.contains("true"));
    // The paper-title sections match no rule and are surfaced for triage.
    assert!(stdout.contains("unmatched titles"));
    assert!(stdout.contains("Sparse Routing for Faster Inference"));
}

fn run_fixture_pipeline(root: &Path) {
    let status = binary()
        .args(["run", "--corpus"])
        .arg(corpus())
        .args(["--out"])
        .arg(root)
        .args(["--provider", "mock", "--mock-script"])
        .arg(mock_script())
        .args(["--run-id", "cli-test", "--seed", "7"])
        .status()
        .unwrap();
    assert!(status.success());
}

#[test]
fn accounting_commands_read_a_finished_run() {
    let tmp = tempfile::tempdir().unwrap();
    run_fixture_pipeline(tmp.path());

    let stats = binary()
        .args(["perturb-stats", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    assert_eq!(stats.status.code(), Some(0));
    let table = String::from_utf8_lossy(&stats.stdout);
    // Conclusion flips one "Rating: N" token per review, 2 reviews a bundle:
    // 6 bundles, sum 12, mean 2.
    let conclusion_row = table
        .lines()
        .find(|l| l.contains("conclusion"))
        .expect("stats table has a conclusion row");
    assert!(conclusion_row.contains("12"), "{conclusion_row}");
    assert!(conclusion_row.contains("2.00"), "{conclusion_row}");
    let csv = fs::read_to_string(tmp.path().join("perturb_stats.csv")).unwrap();
    assert!(csv.contains("review,conclusion,6,12,2,2,2"));
    assert!(csv.contains("review,factual,6,36,6,6,6"));

    let eval = binary()
        .args(["eval-manifest", "--out"])
        .arg(tmp.path())
        .args(["--per-aspect", "10", "--claim-sample", "20", "--seed", "5"])
        .output()
        .unwrap();
    assert_eq!(eval.status.code(), Some(0), "{:?}", eval);
    let manifest = fs::read_to_string(tmp.path().join("eval/manual_eval_manifest.csv")).unwrap();
    // Header + 8 aspects x 10 + 20 claims.
    assert_eq!(manifest.lines().count(), 1 + 80 + 20);
    assert!(manifest.starts_with("mode,aspect,bundle_id,before_excerpt,after_excerpt,verdict"));
    let blank_verdicts = manifest
        .lines()
        .skip(1)
        .filter(|l| l.ends_with(','))
        .count();
    assert_eq!(blank_verdicts, 100, "verdict column must stay blank");
}

#[test]
fn eval_manifest_with_oversized_request_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    run_fixture_pipeline(tmp.path());
    let output = binary()
        .args(["eval-manifest", "--out"])
        .arg(tmp.path())
        .args(["--per-aspect", "1000", "--claim-sample", "0"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("insufficient samples"));
}

#[test]
fn config_file_applies_and_flags_override_it() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("review-perturb.toml");
    fs::write(
        &config_path,
        "[run]\njobs = 1\nseed = 99\n\n[analysis]\nalpha = 0.10\n",
    )
    .unwrap();

    let root = tmp.path().join("work");
    let status = binary()
        .args(["run", "--corpus"])
        .arg(corpus())
        .arg("--out")
        .arg(&root)
        .args(["--provider", "mock", "--mock-script"])
        .arg(mock_script())
        .args(["--run-id", "cfg-test", "--config"])
        .arg(&config_path)
        .args(["--seed", "7"]) // flag beats the config file's 99
        .status()
        .unwrap();
    assert!(status.success());

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(root.join("runs/cfg-test/manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["seed"].as_u64(), Some(7));
    assert_eq!(manifest["config"]["jobs"].as_u64(), Some(1));
    assert_eq!(manifest["config"]["alpha"].as_f64(), Some(0.10));
    // The output dir carries the manifest that produced it.
    assert!(root.join("runs/cfg-test/manifest.json").is_file());
}

#[test]
fn classify_bodies_consults_the_gateway_for_unmatched_titles() {
    let tmp = tempfile::tempdir().unwrap();
    // The six paper-title sections are the only unmatched titles; script a
    // body-classification answer for each.
    let mut by_tag = serde_json::Map::new();
    for spec in &support::BUNDLES {
        by_tag.insert(
            format!("classify/{}/{}", spec.id, spec.title),
            serde_json::Value::String("Contribution: yes\nSoundness: no\n".to_string()),
        );
    }
    let script_path = tmp.path().join("classify_script.json");
    fs::write(
        &script_path,
        serde_json::to_string_pretty(&serde_json::json!({"by_tag": by_tag})).unwrap(),
    )
    .unwrap();

    let output = binary()
        .args(["classify-sections", "--classify-bodies", "--corpus"])
        .arg(corpus())
        .arg("--out")
        .arg(tmp.path().join("work"))
        .args(["--provider", "mock", "--mock-script"])
        .arg(&script_path)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0), "{:?}", output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(!stdout.contains("unmatched titles"));
    let title_row = stdout
        .lines()
        .find(|l| l.contains("Sparse Routing"))
        .unwrap();
    assert!(title_row.contains("(body)"));
    assert!(title_row.contains("true"));
}

#[test]
fn mock_provider_without_script_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let output = binary()
        .args(["run", "--corpus"])
        .arg(corpus())
        .arg("--out")
        .arg(tmp.path())
        .args(["--provider", "mock", "--run-id", "x"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&output.stderr).contains("mock-script"));
}
