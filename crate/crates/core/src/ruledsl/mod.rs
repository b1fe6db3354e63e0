//! Rule language: AST, a noise-tolerant parser for LLM responses, evaluation
//! and feature-matrix construction.

mod ast;
mod eval;
mod parser;

pub use ast::{print_rule, BinOp, CmpOp, Expr, Rule};
pub use eval::{
    build_feature_matrix, evaluate_rule, impute_missing, numbers_equal, truth, FeatureMatrix,
    MissingStrategy, Truth,
};
pub use parser::{parse_rule, ParseError, ParseErrorKind};

use serde::{Deserialize, Serialize};

use crate::schema::FeatureSchema;

/// The rules proposed for one class, plus the number of lines dropped as
/// unparseable.
#[derive(Clone, Debug, PartialEq)]
pub struct RuleSet {
    pub class_label: String,
    pub rules: Vec<Rule>,
    pub skipped: usize,
}

/// On-disk rule cache entry: canonical rule strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSetFile {
    pub class: String,
    pub rules: Vec<String>,
    pub skipped: usize,
}

impl RuleSet {
    pub fn to_file(&self) -> RuleSetFile {
        RuleSetFile {
            class: self.class_label.clone(),
            rules: self.rules.iter().map(print_rule).collect(),
            skipped: self.skipped,
        }
    }

    pub fn from_file(file: &RuleSetFile, schema: &FeatureSchema) -> Result<Self, ParseError> {
        let rules = file
            .rules
            .iter()
            .map(|r| parse_rule(r, schema))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            class_label: file.class.clone(),
            rules,
            skipped: file.skipped,
        })
    }
}

/// A rule line that failed to parse.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LineError {
    pub line: String,
    pub kind: ParseErrorKind,
    pub message: String,
}

/// Parses every line, keeping the good ones and recording the rest.
pub fn parse_ruleset(
    class_label: &str,
    lines: &[String],
    schema: &FeatureSchema,
) -> (RuleSet, Vec<LineError>) {
    let mut rules = Vec::new();
    let mut errors = Vec::new();
    for line in lines {
        match parse_rule(line, schema) {
            Ok(r) => rules.push(r),
            Err(e) => {
                log::debug!("skipping rule line `{line}`: {e}");
                errors.push(LineError {
                    line: line.clone(),
                    kind: e.kind,
                    message: e.message,
                })
            }
        }
    }
    let skipped = errors.len();
    (
        RuleSet {
            class_label: class_label.to_owned(),
            rules,
            skipped,
        },
        errors,
    )
}

const QUOTE_CHARS: &[char] = &['"', '\'', '`', '‘', '’', '“', '”', '«', '»', '*'];

fn ascii_lower(s: &str) -> String {
    s.to_ascii_lowercase()
}

/// Which class a header line names, if it is a header at all.
fn header_class(line: &str, classes: &[String]) -> Option<Option<usize>> {
    const MARKER: &str = "conditions for class";
    let lower = ascii_lower(line);
    let at = lower.find(MARKER)?;
    let tail = &line[at + MARKER.len()..];
    let name: String = tail
        .chars()
        .filter(|c| !QUOTE_CHARS.contains(c))
        .collect::<String>()
        .trim()
        .trim_end_matches(':')
        .trim()
        .to_owned();
    let name = ascii_lower(&name);
    Some(classes.iter().position(|c| ascii_lower(c.trim()) == name))
}

/// Groups `-` lines under their `... conditions for class "<label>":` header.
/// The result is aligned with `classes`; a class without a header gets an
/// empty list. Text before the first header is ignored.
pub fn extract_class_blocks(response: &str, classes: &[String]) -> Vec<Vec<String>> {
    let mut blocks = vec![Vec::new(); classes.len()];
    let mut current: Option<usize> = None;
    for raw in response.lines() {
        let line = raw.trim();
        if let Some(class) = header_class(line, classes) {
            current = class;
            continue;
        }
        if let Some(c) = current {
            if line.starts_with('-') {
                blocks[c].push(line.to_owned());
            }
        }
    }
    blocks
}
