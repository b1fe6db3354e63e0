//! Rule-extraction and rule-parsing prompt construction.
//!
//! Prompts are produced by plain slot substitution into fixed templates, so
//! identical inputs always give identical bytes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{serialize_subset, FeatureKind, FeatureSchema, LabeledSet, TaskSpec};

/// Bumped whenever any template text below changes.
pub const TEMPLATE_VERSION: u32 = 1;

const PREAMBLE: &str = "You are an expert. Given the task description and the list of features and data examples, you are extracting conditions for each answer class to solve the task.";
const REASONING_INTRO: &str =
    "Let's first understand the problem and solve the problem step by step.";
const REASONING_STEP1: &str = "Step 1. Analyze the causal relationship or tendency between each feature and task description based on general knowledge and common sense within a short sentence.";
const REASONING_STEP2: &str = "Step 2. Based on the above examples and Step 1's results, infer {n} different conditions per answer, following the format below. The condition should make sense, well match examples, and must match the format for [condition] according to value type.";
const CONDITION_FORMAT: &str = "Format for [Condition]:
For the categorical variable only,
- [Feature] is in [List of categories]
For the numerical variable only,
- [Feature] (> or >= or < or <=) [Value]
- [Feature] is within range of [Value_start, Value_end]";

const PARSE_TEMPLATE: &str = "Provide me a python code for function, given description below.

Function name: {name}

Input: Dataframe df_input

Input Features:
{features}

Output: Dataframe df_output. Create a new dataframe df_output. Each column in df_output refers whether the selected column in df_input follows the condition (1) or not (0). Be sure that the function code well matches with its feature type (i.e., numerical, categorical).

Conditions:
{conditions}

Wrap only the function part with <start> and <end>, and do not add any comments, descriptions, and package importing lines in the code.";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("example index {0} is out of range")]
    BadExampleIndex(usize),
    #[error("no examples selected for the prompt")]
    NoExamples,
    #[error("no rules to include")]
    NoRules,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PromptConfig {
    pub num_rules_per_class: usize,
    pub include_descriptions: bool,
    pub include_reasoning_step1: bool,
}

impl Default for PromptConfig {
    fn default() -> Self {
        Self {
            num_rules_per_class: 10,
            include_descriptions: true,
            include_reasoning_step1: true,
        }
    }
}

/// Per-trial randomization: demonstration order plus the bagged feature and
/// sample subsets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialContext {
    /// Permutation of k-shot indices.
    pub example_order: Vec<usize>,
    /// Schema feature names, in schema order.
    pub feature_subset: Vec<String>,
    /// k-shot indices shown in the prompt, ascending.
    pub sample_subset: Vec<usize>,
    pub seed: u64,
}

impl TrialContext {
    /// Every feature and every example, in their given order.
    pub fn full(schema: &FeatureSchema, num_shots: usize) -> Self {
        Self {
            example_order: (0..num_shots).collect(),
            feature_subset: schema.names().map(str::to_owned).collect(),
            sample_subset: (0..num_shots).collect(),
            seed: 0,
        }
    }
}

fn feature_positions(schema: &FeatureSchema, subset: &[String]) -> Result<Vec<usize>, PromptError> {
    subset
        .iter()
        .map(|n| {
            schema
                .position(n)
                .ok_or_else(|| PromptError::UnknownFeature(n.clone()))
        })
        .collect()
}

fn feature_line(schema: &FeatureSchema, pos: usize, with_description: bool) -> String {
    let f = &schema.features()[pos];
    let kind = match f.kind {
        FeatureKind::Numerical => "numerical variable".to_owned(),
        FeatureKind::Categorical => format!(
            "categorical variable with categories [{}]",
            f.categories.join(", ")
        ),
    };
    match f.description.as_deref().filter(|d| with_description && !d.is_empty()) {
        Some(desc) => format!("- {}: {} ({})", f.name, desc, kind),
        None => format!("- {} ({})", f.name, kind),
    }
}

/// One `- <name>: <description> (<type>)` line per feature in `subset`.
pub fn render_feature_lines(schema: &FeatureSchema, subset: &[String]) -> Result<String, PromptError> {
    render_lines(schema, subset, true)
}

fn render_lines(
    schema: &FeatureSchema,
    subset: &[String],
    with_description: bool,
) -> Result<String, PromptError> {
    let positions = feature_positions(schema, subset)?;
    Ok(positions
        .into_iter()
        .map(|p| feature_line(schema, p, with_description))
        .collect::<Vec<_>>()
        .join("\n"))
}

pub fn build_rule_prompt(
    task: &TaskSpec,
    schema: &FeatureSchema,
    shots: &LabeledSet,
    ctx: &TrialContext,
    cfg: &PromptConfig,
) -> Result<String, PromptError> {
    let positions = feature_positions(schema, &ctx.feature_subset)?;
    let features = render_lines(schema, &ctx.feature_subset, cfg.include_descriptions)?;

    let shown: HashSet<usize> = ctx.sample_subset.iter().copied().collect();
    let mut examples = Vec::new();
    for &i in &ctx.example_order {
        if i >= shots.len() {
            return Err(PromptError::BadExampleIndex(i));
        }
        if shown.contains(&i) {
            let label = &task.classes[shots.labels[i]];
            examples.push(serialize_subset(
                &shots.rows[i],
                Some(label),
                schema,
                Some(&positions),
            ));
        }
    }
    if examples.is_empty() {
        return Err(PromptError::NoExamples);
    }

    let n = cfg.num_rules_per_class.to_string();
    let mut out = String::new();
    out.push_str(PREAMBLE);
    out.push_str("\n\nTask: ");
    out.push_str(&task.question);
    out.push_str("\n\nFeatures:\n");
    out.push_str(&features);
    out.push_str("\n\nExamples:\n");
    out.push_str(&examples.join("\n"));
    out.push_str("\n\n");
    out.push_str(REASONING_INTRO);
    out.push('\n');
    if cfg.include_reasoning_step1 {
        out.push_str(REASONING_STEP1);
        out.push('\n');
    }
    out.push_str(&REASONING_STEP2.replace("{n}", &n));
    out.push_str("\n\nFormat for Response:\n");
    let blocks: Vec<String> = task
        .classes
        .iter()
        .map(|c| format!("{n} different conditions for class \"{c}\":\n- [Condition]\n..."))
        .collect();
    out.push_str(&blocks.join("\n\n"));
    out.push_str("\n\n");
    out.push_str(CONDITION_FORMAT);
    out.push_str("\n\nAnswer:");
    if cfg.include_reasoning_step1 {
        out.push_str("\nStep 1.");
    }
    Ok(out)
}

/// Rough token count used for prompt budgeting: one token per four characters.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Prompt asking an external model to turn rules into a dataframe function.
/// This crate never executes the answer; it parses rules natively.
pub fn build_parse_prompt(
    rules: &[String],
    schema: &FeatureSchema,
    function_name: &str,
) -> Result<String, PromptError> {
    if rules.is_empty() {
        return Err(PromptError::NoRules);
    }
    let all: Vec<String> = schema.names().map(str::to_owned).collect();
    let features = render_feature_lines(schema, &all)?;
    let conditions = rules
        .iter()
        .map(|r| {
            let r = r.trim();
            if r.starts_with('-') {
                r.to_owned()
            } else {
                format!("- {r}")
            }
        })
        .collect::<Vec<_>>()
        .join("\n");
    Ok(PARSE_TEMPLATE
        .replace("{name}", function_name)
        .replace("{features}", &features)
        .replace("{conditions}", &conditions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{FeatureDesc, Row, Value};

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDesc::numerical("x", None),
            FeatureDesc::categorical("c", Some("a colour"), &["red", "blue"]),
        ])
        .unwrap()
    }

    #[test]
    fn feature_line_forms() {
        let s = schema();
        assert_eq!(
            render_feature_lines(&s, &["x".into()]).unwrap(),
            "- x (numerical variable)"
        );
        assert_eq!(
            render_feature_lines(&s, &["c".into()]).unwrap(),
            "- c: a colour (categorical variable with categories [red, blue])"
        );
        assert_eq!(
            render_feature_lines(&s, &["nope".into()]),
            Err(PromptError::UnknownFeature("nope".into()))
        );
    }

    #[test]
    fn rule_count_substituted() {
        let s = schema();
        let task = TaskSpec::new("Q? Yes or no?", &["no", "yes"]).unwrap();
        let shots = LabeledSet::new(
            vec![Row::new(vec![Value::num(1.0), Value::cat("red")])],
            vec![1],
            2,
        )
        .unwrap();
        let cfg = PromptConfig {
            num_rules_per_class: 3,
            ..Default::default()
        };
        let p = build_rule_prompt(&task, &s, &shots, &TrialContext::full(&s, 1), &cfg).unwrap();
        assert!(p.contains("3 different conditions for class \"no\":"));
        assert!(p.contains("3 different conditions for class \"yes\":"));
        assert!(p.contains("infer 3 different conditions per answer"));
        assert!(p.ends_with("Answer:\nStep 1."));
    }

    #[test]
    fn parse_prompt_single_rule() {
        let s = schema();
        let p = build_parse_prompt(&["x > 1".into()], &s, "f").unwrap();
        assert!(p.contains("Function name: f\n"));
        assert!(p.contains("Conditions:\n- x > 1\n\nWrap"));
        assert_eq!(build_parse_prompt(&[], &s, "f"), Err(PromptError::NoRules));
    }

    #[test]
    fn token_estimate_rounds_up() {
        assert_eq!(estimate_tokens(""), 0);
        assert_eq!(estimate_tokens("abcde"), 2);
        assert_eq!(estimate_tokens("abcd"), 1);
    }
}
