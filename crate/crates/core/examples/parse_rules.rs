//! Parses a recorded model answer into per-class rule sets and prints the
//! canonical form of every rule, plus a few deliberately malformed lines.

use std::path::Path;

use featling::ruledsl::{extract_class_blocks, parse_rule, parse_ruleset};
use featling::schema::load_metadata;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/heart");
    let (schema, task, _) = load_metadata(&root.join("metadata.json"))
        .expect("metadata loads")
        .into_parts()
        .expect("metadata is valid");
    let answer = std::fs::read_to_string(root.join("rule_response.txt")).expect("fixture");

    for (class, lines) in task.classes.iter().zip(extract_class_blocks(&answer, &task.classes)) {
        let (rules, errors) = parse_ruleset(class, &lines, &schema);
        println!("class {class}: {} rules, {} skipped", rules.rules.len(), errors.len());
        for r in &rules.rules {
            println!("  {r}");
        }
    }

    for line in [
        "- Age > 50 and (Cholesterol >= 240 or MaxHR < 120)",
        "- (RestingBP - 10) / 2 >= 60",
        "- ChestPainType is not in [ATA]",
        "- Weight > 80",
        "- Sex > 3",
        "- Age >",
    ] {
        match parse_rule(line, &schema) {
            Ok(r) => println!("{line:50} -> {r}"),
            Err(e) => println!("{line:50} -> {:?}: {}", e.kind, e.message),
        }
    }
}
