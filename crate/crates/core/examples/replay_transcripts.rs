//! Records a completion into a transcript store, then serves it back from a
//! strict replay client. Pass a directory to keep the store.
//!
//! ```text
//! cargo run --example replay_transcripts -- fixtures/heart/transcripts
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use featling::llm::{request_key, CompletionRequest, LlmClient, ReplayClient, ScriptedClient};
use featling::prompt::{build_rule_prompt, PromptConfig, TrialContext};
use featling::schema::load_dataset;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/heart");
    let store: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("featling-transcripts"));

    let ds = load_dataset(&root.join("shots.csv"), &root.join("metadata.json")).expect("fixture loads");
    let ctx = TrialContext::full(&ds.schema, ds.data.len());
    let prompt = build_rule_prompt(&ds.task, &ds.schema, &ds.data, &ctx, &PromptConfig::default()).expect("prompt");
    let answer = std::fs::read_to_string(root.join("rule_response.txt")).expect("fixture");

    let request = CompletionRequest::new(prompt, "gpt-3.5-turbo-0613");
    let recorder = ReplayClient::recording(&store, Arc::new(ScriptedClient::constant(answer.clone())));
    recorder.complete(&request).expect("records");

    let replay = ReplayClient::strict(&store);
    let served = replay.complete(&request).expect("hit");
    assert_eq!(served.text, answer);
    println!("stored {}/{}.json", store.display(), request_key(&request));
}
