#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use featling::schema::{load_dataset, Dataset};

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn heart_dir() -> PathBuf {
    crate_dir().join("fixtures/heart")
}

pub fn heart() -> Dataset {
    let root = heart_dir();
    load_dataset(&root.join("shots.csv"), &root.join("metadata.json")).expect("heart fixture loads")
}

pub fn heart_text(name: &str) -> String {
    std::fs::read_to_string(heart_dir().join(name)).expect("heart fixture file")
}

/// Every file under `root`, keyed by its relative path.
pub fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).expect("readable file"));
            }
        }
    }
    out
}

/// Runs the command line in-process with the given provider.
pub fn run_cli(args: &[&str], provider: &featling::cli::ClientProvider) -> i32 {
    use clap::Parser;
    let mut full = vec!["featling"];
    full.extend_from_slice(args);
    featling::cli::execute(&featling::cli::Cli::parse_from(full), provider)
}

/// A small solution-mix config in `dir`, returning its path.
pub fn solution_mix_config(dir: &Path, llm: &str, trials: usize, repeats: usize) -> PathBuf {
    let path = dir.join("config.json");
    let text = format!(
        r#"{{
  "dataset": {{ "synthetic": "solution_mix", "rows": 300, "seed": 0 }},
  "llm": {llm},
  "ensemble": {{ "trials": {trials}, "seed": 0 }},
  "eval": {{ "shots": [4], "repeats": {repeats} }}
}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}
