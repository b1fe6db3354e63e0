mod common;

use std::process::Command;

use featling::cli::{default_client, CliError, LlmSettings, EXIT_CONFIG, EXIT_OK};
use featling::llm::{CompletionRequest, LlmClient, ReplayClient};
use featling::prompt::{build_rule_prompt, PromptConfig, TrialContext};

const ORACLE: &str = r#"{ "kind": "scripted", "script": "solution_mix_oracle" }"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_featling"))
}

#[test]
fn staged_commands_match_run() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::solution_mix_config(dir.path(), ORACLE, 5, 2);
    let config = config.to_str().unwrap();
    let whole = dir.path().join("whole");
    let staged = dir.path().join("staged");
    assert_eq!(common::run_cli(&["run", "--config", config, "--output", whole.to_str().unwrap()], &default_client), EXIT_OK);
    for stage in ["extract", "train", "predict", "eval"] {
        let code = common::run_cli(&[stage, "--config", config, "--output", staged.to_str().unwrap()], &default_client);
        assert_eq!(code, EXIT_OK, "{stage}");
    }
    let a = common::read_tree(&whole);
    let b = common::read_tree(&staged);
    assert!(a.keys().any(|k| k.ends_with("predictions.csv")));
    assert_eq!(a, b);
}

#[test]
fn missing_api_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::solution_mix_config(dir.path(), r#"{ "kind": "http" }"#, 2, 1);
    let out = bin()
        .args(["run", "--config", config.to_str().unwrap(), "--output"])
        .arg(dir.path().join("out"))
        .env_remove("FEATLING_API_KEY")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("FEATLING_API_KEY"), "{stderr}");
}

#[test]
fn later_stage_without_artifacts_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::solution_mix_config(dir.path(), ORACLE, 2, 1);
    let out = dir.path().join("empty");
    for stage in ["train", "predict", "eval"] {
        let code = common::run_cli(&[stage, "--config", config.to_str().unwrap(), "--output", out.to_str().unwrap()], &default_client);
        assert_eq!(code, EXIT_CONFIG, "{stage}");
    }
}

#[test]
fn no_ensemble_runs_one_trial() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::solution_mix_config(dir.path(), ORACLE, 8, 2);
    let out = dir.path().join("out");
    let code = common::run_cli(
        &["run", "--config", config.to_str().unwrap(), "--ablation", "no-ensemble", "--output", out.to_str().unwrap()],
        &default_client,
    );
    assert_eq!(code, EXIT_OK);
    let manifest: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let repeats = manifest["cells"][0]["repeats"].as_array().unwrap();
    assert_eq!(repeats.len(), 2);
    for r in repeats {
        assert_eq!(r["trials"], 1);
    }
    assert_eq!(manifest["cells"][0]["ablation"], "no_ensemble");
}

#[test]
fn extraction_failure_is_a_pipeline_error() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("prose.txt");
    std::fs::write(&script, "I would rather not list any conditions.").unwrap();
    let llm = format!(r#"{{ "kind": "scripted", "script": "{}" }}"#, script.display());
    let config = common::solution_mix_config(dir.path(), &llm, 2, 1);
    let code = common::run_cli(
        &["run", "--config", config.to_str().unwrap(), "--output", dir.path().join("out").to_str().unwrap()],
        &default_client,
    );
    assert_eq!(code, featling::cli::EXIT_PIPELINE);
}

#[test]
fn inspect_prompt_prints_the_golden_heart_prompt() {
    let config = common::crate_dir().join("examples/configs/heart.json");
    let out = bin()
        .args(["inspect", "prompt", "--trial", "0", "--unshuffled", "--config"])
        .arg(&config)
        .arg("--shots-file")
        .arg(common::heart_dir().join("shots.csv"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap(), common::heart_text("rule_prompt.txt"));
}

#[test]
fn inspect_weights_is_sorted_and_thresholded() {
    let dir = tempfile::tempdir().unwrap();
    let config = common::solution_mix_config(dir.path(), ORACLE, 3, 1);
    let config = config.to_str().unwrap();
    let out = dir.path().join("out");
    assert_eq!(common::run_cli(&["run", "--config", config, "--output", out.to_str().unwrap()], &default_client), EXIT_OK);
    let printed = bin()
        .args(["inspect", "weights", "--trial", "1", "--config", config, "--output"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(printed.status.success());
    let text = String::from_utf8(printed.stdout).unwrap();
    let mut block: Vec<(f64, usize)> = Vec::new();
    let mut blocks = 0;
    for line in text.lines().chain(std::iter::once("class end:")) {
        if line.starts_with("class ") {
            for pair in block.windows(2) {
                assert!(pair[0].0 > pair[1].0 || (pair[0].0 == pair[1].0 && pair[0].1 < pair[1].1), "{text}");
            }
            block.clear();
            blocks += 1;
            continue;
        }
        let mut parts = line.split_whitespace();
        let w: f64 = parts.next().unwrap().parse().unwrap();
        let j: usize = parts.next().unwrap().trim_matches(|c| c == '[' || c == ']').parse().unwrap();
        assert!(w >= 0.1);
        block.push((w, j));
    }
    assert_eq!(blocks, 3);
}

#[test]
fn heart_transcript_replays_strictly() {
    let ds = common::heart();
    let ctx = TrialContext::full(&ds.schema, ds.data.len());
    let prompt = build_rule_prompt(&ds.task, &ds.schema, &ds.data, &ctx, &PromptConfig::default()).unwrap();
    let client = ReplayClient::strict(common::heart_dir().join("transcripts"));
    let hit = client.complete(&CompletionRequest::new(prompt.clone(), "gpt-3.5-turbo-0613")).unwrap();
    assert_eq!(hit.text, common::heart_text("rule_response.txt"));
    let mut cold = CompletionRequest::new(prompt, "gpt-3.5-turbo-0613");
    cold.temperature = 0.7;
    assert!(client.complete(&cold).is_err());
}

#[test]
fn replay_miss_without_recording_fails() {
    let dir = tempfile::tempdir().unwrap();
    let llm = format!(r#"{{ "kind": "replay", "transcripts": "{}" }}"#, dir.path().join("none").display());
    let config = common::solution_mix_config(dir.path(), &llm, 2, 1);
    let provider = |s: &LlmSettings| -> Result<std::sync::Arc<dyn LlmClient>, CliError> { default_client(s) };
    let code = common::run_cli(
        &["extract", "--config", config.to_str().unwrap(), "--output", dir.path().join("out").to_str().unwrap()],
        &provider,
    );
    assert_ne!(code, EXIT_OK);
}
