//! Turns rules into per-row indicator features, including rows with missing
//! values under each missing-value strategy.

use std::path::Path;

use featling::ruledsl::{build_feature_matrix, impute_missing, parse_ruleset, MissingStrategy};
use featling::schema::{load_metadata, Row, Value};

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/heart");
    let (schema, _, _) = load_metadata(&root.join("metadata.json"))
        .expect("metadata loads")
        .into_parts()
        .expect("metadata is valid");
    let lines: Vec<String> = ["- Age > 50", "- Sex is in [M] and Oldpeak >= 1", "- MaxHR < 140 or Cholesterol > 240"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let (rules, _) = parse_ruleset("yes", &lines, &schema);

    let full = |age: Value, chol: Value| {
        Row::new(vec![
            age,
            Value::cat("M"),
            Value::cat("ASY"),
            Value::num(140.0),
            chol,
            Value::num(0.0),
            Value::cat("Normal"),
            Value::num(150.0),
            Value::cat("Y"),
            Value::num(1.5),
            Value::cat("Flat"),
        ])
    };
    let rows = vec![
        full(Value::num(61.0), Value::num(289.0)),
        full(Value::Missing, Value::num(200.0)),
        full(Value::num(45.0), Value::Missing),
    ];

    for strategy in [MissingStrategy::Zero, MissingStrategy::Half, MissingStrategy::Impute] {
        let m = build_feature_matrix(&rules, &rows, &schema, strategy, None);
        let m = if strategy == MissingStrategy::Impute {
            let fill = impute_missing(&m);
            m.with_fill(&fill)
        } else {
            m
        };
        println!("{:6} {:?}", strategy.name(), m.values);
    }
}
