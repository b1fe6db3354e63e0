//! Rule evaluation and feature-matrix construction.

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, CmpOp, Expr, Rule};
use super::RuleSet;
use crate::schema::{FeatureSchema, Row, Value};

/// How a rule touching a missing value is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingStrategy {
    /// Treat the rule as unsatisfied.
    #[default]
    Zero,
    /// Score 0.5.
    Half,
    /// Use the rule's satisfaction rate on the training rows.
    Impute,
}

impl MissingStrategy {
    pub fn name(self) -> &'static str {
        match self {
            MissingStrategy::Zero => "zero",
            MissingStrategy::Half => "half",
            MissingStrategy::Impute => "impute",
        }
    }
}

/// Three-valued outcome before a missing-value strategy is applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Truth {
    No,
    Yes,
    Unknown,
}

impl Truth {
    fn and(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::No, _) | (_, Truth::No) => Truth::No,
            (Truth::Unknown, _) | (_, Truth::Unknown) => Truth::Unknown,
            _ => Truth::Yes,
        }
    }

    fn or(self, other: Truth) -> Truth {
        match (self, other) {
            (Truth::Yes, _) | (_, Truth::Yes) => Truth::Yes,
            (Truth::Unknown, _) | (_, Truth::Unknown) => Truth::Unknown,
            _ => Truth::No,
        }
    }

    fn from_bool(b: bool) -> Truth {
        if b {
            Truth::Yes
        } else {
            Truth::No
        }
    }
}

enum Num {
    Value(f64),
    Missing,
    /// division by zero or overflow
    Undefined,
}

fn eval_expr(expr: &Expr, row: &Row, schema: &FeatureSchema) -> Num {
    match expr {
        Expr::Const(v) => Num::Value(*v),
        Expr::Feature(name) => match row.by_name(schema, name) {
            Some(Value::Number(n)) => Num::Value(n.value),
            _ => Num::Missing,
        },
        Expr::Binary(op, l, r) => {
            let (a, b) = (eval_expr(l, row, schema), eval_expr(r, row, schema));
            let (a, b) = match (a, b) {
                (Num::Missing, _) | (_, Num::Missing) => return Num::Missing,
                (Num::Undefined, _) | (_, Num::Undefined) => return Num::Undefined,
                (Num::Value(a), Num::Value(b)) => (a, b),
            };
            let v = match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div if b == 0.0 => return Num::Undefined,
                BinOp::Div => a / b,
            };
            if v.is_finite() {
                Num::Value(v)
            } else {
                Num::Undefined
            }
        }
    }
}

/// Exact equality on integral operands; otherwise a 1e-9 relative tolerance.
pub fn numbers_equal(a: f64, b: f64) -> bool {
    if a.fract() == 0.0 && b.fract() == 0.0 {
        a == b
    } else {
        (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
    }
}

fn compare(a: f64, op: CmpOp, b: f64) -> bool {
    match op {
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
        CmpOp::Eq => numbers_equal(a, b),
        CmpOp::Ne => !numbers_equal(a, b),
    }
}

pub fn truth(rule: &Rule, row: &Row, schema: &FeatureSchema) -> Truth {
    match rule {
        Rule::CatIn { feature, values } => match row.by_name(schema, feature) {
            Some(Value::Category(c)) => Truth::from_bool(values.iter().any(|v| v == c)),
            Some(Value::Number(n)) => {
                Truth::from_bool(values.iter().any(|v| v.parse::<f64>().is_ok_and(|x| numbers_equal(x, n.value))))
            }
            _ => Truth::Unknown,
        },
        Rule::NumRange { feature, lo, hi } => match row.by_name(schema, feature) {
            Some(Value::Number(n)) => Truth::from_bool(*lo <= n.value && n.value <= *hi),
            _ => Truth::Unknown,
        },
        Rule::Cmp { left, op, right } => {
            match (eval_expr(left, row, schema), eval_expr(right, row, schema)) {
                (Num::Missing, _) | (_, Num::Missing) => Truth::Unknown,
                (Num::Value(a), Num::Value(b)) => Truth::from_bool(compare(a, *op, b)),
                _ => Truth::No,
            }
        }
        Rule::And(members) => members
            .iter()
            .fold(Truth::Yes, |acc, r| acc.and(truth(r, row, schema))),
        Rule::Or(members) => members
            .iter()
            .fold(Truth::No, |acc, r| acc.or(truth(r, row, schema))),
    }
}

/// Scores one rule on one row: 1 satisfied, 0 not, and a strategy-dependent
/// fill when a missing operand decides the outcome. Kleene logic followed by
/// the fill equals taking min/max over filled members, since fills lie in
/// `[0, 1]`.
pub fn evaluate_rule(
    rule: &Rule,
    row: &Row,
    schema: &FeatureSchema,
    strategy: MissingStrategy,
    fill: Option<f64>,
) -> f64 {
    match truth(rule, row, schema) {
        Truth::Yes => 1.0,
        Truth::No => 0.0,
        Truth::Unknown => match strategy {
            MissingStrategy::Zero => 0.0,
            MissingStrategy::Half => 0.5,
            MissingStrategy::Impute => fill.unwrap_or(0.5),
        },
    }
}

/// Rule-satisfaction values for one class: `values[i][j]` scores rule `j` on
/// row `i`. `missing` marks cells decided by a missing value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub class_label: String,
    pub values: Vec<Vec<f64>>,
    #[serde(skip)]
    pub missing: Vec<Vec<bool>>,
    pub num_rules: usize,
}

impl FeatureMatrix {
    pub fn from_values(class_label: &str, values: Vec<Vec<f64>>, num_rules: usize) -> Self {
        let missing = values.iter().map(|r| vec![false; r.len()]).collect();
        Self {
            class_label: class_label.to_owned(),
            values,
            missing,
            num_rules,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    /// Replaces missing-affected cells with the per-rule fill.
    pub fn with_fill(mut self, fill_table: &[f64]) -> Self {
        for (row, miss) in self.values.iter_mut().zip(&self.missing) {
            for (j, (v, &m)) in row.iter_mut().zip(miss).enumerate() {
                if m {
                    *v = fill_table[j];
                }
            }
        }
        self
    }

    /// Side-by-side concatenation of matrices over the same rows.
    pub fn concat(label: &str, parts: &[FeatureMatrix]) -> Self {
        let rows = parts.first().map_or(0, FeatureMatrix::num_rows);
        let mut values = vec![Vec::new(); rows];
        let mut missing = vec![Vec::new(); rows];
        for p in parts {
            assert_eq!(p.num_rows(), rows, "matrices must share rows");
            for i in 0..rows {
                values[i].extend_from_slice(&p.values[i]);
                missing[i].extend_from_slice(&p.missing[i]);
            }
        }
        Self {
            class_label: label.to_owned(),
            values,
            missing,
            num_rules: parts.iter().map(|p| p.num_rules).sum(),
        }
    }
}

pub fn build_feature_matrix(
    ruleset: &RuleSet,
    rows: &[Row],
    schema: &FeatureSchema,
    strategy: MissingStrategy,
    fill_table: Option<&[f64]>,
) -> FeatureMatrix {
    let r = ruleset.rules.len();
    let mut values = Vec::with_capacity(rows.len());
    let mut missing = Vec::with_capacity(rows.len());
    for row in rows {
        let mut vals = Vec::with_capacity(r);
        let mut miss = Vec::with_capacity(r);
        for (j, rule) in ruleset.rules.iter().enumerate() {
            let t = truth(rule, row, schema);
            miss.push(t == Truth::Unknown);
            vals.push(match t {
                Truth::Yes => 1.0,
                Truth::No => 0.0,
                Truth::Unknown => match strategy {
                    MissingStrategy::Zero => 0.0,
                    MissingStrategy::Half => 0.5,
                    MissingStrategy::Impute => fill_table.map_or(0.5, |f| f[j]),
                },
            });
        }
        values.push(vals);
        missing.push(miss);
    }
    FeatureMatrix {
        class_label: ruleset.class_label.clone(),
        values,
        missing,
        num_rules: r,
    }
}

/// Per-rule fill value: the mean of the column's non-missing cells, or 0.5
/// when every cell is missing-affected.
pub fn impute_missing(train: &FeatureMatrix) -> Vec<f64> {
    (0..train.num_rules)
        .map(|j| {
            let (sum, n) = train
                .values
                .iter()
                .zip(&train.missing)
                .filter(|(_, m)| !m[j])
                .fold((0.0, 0usize), |(s, n), (v, _)| (s + v[j], n + 1));
            if n == 0 {
                0.5
            } else {
                sum / n as f64
            }
        })
        .collect()
}
