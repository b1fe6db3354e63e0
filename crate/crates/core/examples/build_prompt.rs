//! Builds the rule-extraction prompt for the Heart shots and the follow-up
//! parsing prompt for one class's rules.

use std::path::Path;

use featling::prompt::{build_parse_prompt, build_rule_prompt, estimate_tokens, PromptConfig, TrialContext};
use featling::schema::load_dataset;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/heart");
    let ds = load_dataset(&root.join("shots.csv"), &root.join("metadata.json")).expect("fixture loads");
    let ctx = TrialContext::full(&ds.schema, ds.data.len());

    let prompt = build_rule_prompt(&ds.task, &ds.schema, &ds.data, &ctx, &PromptConfig::default()).expect("prompt");
    println!("{prompt}");
    println!("\n-- about {} tokens --\n", estimate_tokens(&prompt));

    let terse = PromptConfig {
        include_descriptions: false,
        include_reasoning_step1: false,
        ..Default::default()
    };
    let short = build_rule_prompt(&ds.task, &ds.schema, &ds.data, &ctx, &terse).expect("prompt");
    println!("without descriptions and step 1: {} tokens\n", estimate_tokens(&short));

    let rules = ["Age is within range of [40, 60]".to_string(), "Sex is in [F]".to_string()];
    println!("{}", build_parse_prompt(&rules, &ds.schema, "extracting_features_no").expect("prompt"));
}
