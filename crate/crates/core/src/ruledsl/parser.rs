//! Recursive-descent parser for rule lines produced by an LLM.
//!
//! The parser works directly on the source text because feature names and
//! category values may contain spaces, hyphens and digits. All matching of
//! feature names, category values and keywords is ASCII case-insensitive.
//!
//! ```text
//! rule      := and_rule (OR and_rule)*
//! and_rule  := atom (AND atom)*
//! atom      := "(" rule ")" | condition
//! condition := feature MEMBER list
//!            | feature RANGE "[" num "," num "]"  | feature BETWEEN num "and" num
//!            | feature "(" cmp num ")"
//!            | categorical (IS | "=" | "!=") category
//!            | expr cmp expr (cmp expr)?
//! expr      := term (("+" | "-") term)*
//! term      := unary (("*" | "/") unary)*
//! unary     := "-" unary | number | numerical-feature | "(" expr ")"
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{BinOp, CmpOp, Expr, Rule};
use crate::schema::{FeatureDesc, FeatureKind, FeatureSchema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseErrorKind {
    UnknownFeature,
    TypeMismatch,
    MalformedSyntax,
    EmptyMembership,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParseErrorKind::UnknownFeature => "unknown feature",
            ParseErrorKind::TypeMismatch => "type mismatch",
            ParseErrorKind::MalformedSyntax => "malformed syntax",
            ParseErrorKind::EmptyMembership => "empty membership list",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    fn new(kind: ParseErrorKind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    fn syntax(message: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::MalformedSyntax, message)
    }
}

type PResult<T> = Result<T, ParseError>;

// Longest phrases first so that e.g. "greater than or equal to" wins over
// "greater than".
const CMP_WORDS: &[(&str, CmpOp)] = &[
    ("is greater than or equal to", CmpOp::Ge),
    ("greater than or equal to", CmpOp::Ge),
    ("is less than or equal to", CmpOp::Le),
    ("less than or equal to", CmpOp::Le),
    ("is not equal to", CmpOp::Ne),
    ("is greater than", CmpOp::Gt),
    ("is higher than", CmpOp::Gt),
    ("does not equal", CmpOp::Ne),
    ("is lower than", CmpOp::Lt),
    ("greater than", CmpOp::Gt),
    ("is more than", CmpOp::Gt),
    ("is less than", CmpOp::Lt),
    ("is equal to", CmpOp::Eq),
    ("not equal to", CmpOp::Ne),
    ("higher than", CmpOp::Gt),
    ("no more than", CmpOp::Le),
    ("no less than", CmpOp::Ge),
    ("is at least", CmpOp::Ge),
    ("lower than", CmpOp::Lt),
    ("fewer than", CmpOp::Lt),
    ("is at most", CmpOp::Le),
    ("is above", CmpOp::Gt),
    ("is below", CmpOp::Lt),
    ("more than", CmpOp::Gt),
    ("less than", CmpOp::Lt),
    ("at least", CmpOp::Ge),
    ("equal to", CmpOp::Eq),
    ("at most", CmpOp::Le),
    ("equals", CmpOp::Eq),
    ("is not", CmpOp::Ne),
    ("above", CmpOp::Gt),
    ("below", CmpOp::Lt),
    ("is", CmpOp::Eq),
];

const CMP_SYMBOLS: &[(&str, CmpOp)] = &[
    (">=", CmpOp::Ge),
    ("=>", CmpOp::Ge),
    ("<=", CmpOp::Le),
    ("=<", CmpOp::Le),
    ("!=", CmpOp::Ne),
    ("<>", CmpOp::Ne),
    ("==", CmpOp::Eq),
    ("≥", CmpOp::Ge),
    ("≤", CmpOp::Le),
    ("≠", CmpOp::Ne),
    (">", CmpOp::Gt),
    ("<", CmpOp::Lt),
    ("=", CmpOp::Eq),
];

const RANGE_WORDS: &[&str] = &[
    "is within the range of",
    "is within range of",
    "is in the range of",
    "is in range of",
    "within range of",
    "is in the range",
    "is in range",
    "is within",
    "in range of",
    "in range",
    "within",
];

const BETWEEN_WORDS: &[&str] = &["is between", "between"];
const NOT_MEMBER_WORDS: &[&str] = &["is not in", "not in"];
const MEMBER_WORDS: &[&str] = &["is one of", "is any of", "is in", "one of", "in"];
const CAT_EQ_WORDS: &[&str] = &["is equal to", "equals", "is", "==", "="];
const CAT_NE_WORDS: &[&str] = &["is not equal to", "is not", "!=", "<>", "≠"];
const AND_WORDS: &[&str] = &["and", "&&", "&"];
const OR_WORDS: &[&str] = &["or", "||", "|"];

const QUOTES: &[char] = &['"', '\'', '`', '‘', '’', '“', '”'];

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    schema: &'a FeatureSchema,
    // feature indices, longest name first
    by_length: Vec<usize>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, schema: &'a FeatureSchema) -> Self {
        let mut by_length: Vec<usize> = (0..schema.len()).collect();
        by_length.sort_by_key(|&i| std::cmp::Reverse(schema.features()[i].name.len()));
        Self {
            src,
            pos: 0,
            schema,
            by_length,
        }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let rest = self.rest();
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    /// Case-insensitive prefix test; a word-like keyword must end on a word
    /// boundary.
    fn looking_at(&self, kw: &str) -> bool {
        let rest = self.rest();
        let Some(head) = rest.get(..kw.len()) else {
            return false;
        };
        if !head.eq_ignore_ascii_case(kw) {
            return false;
        }
        let last_is_word = kw.chars().last().is_some_and(is_word_char);
        !last_is_word || !rest[kw.len()..].chars().next().is_some_and(is_word_char)
    }

    fn eat(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if self.looking_at(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn eat_any(&mut self, kws: &[&str]) -> Option<usize> {
        self.skip_ws();
        let i = kws.iter().position(|kw| self.looking_at(kw))?;
        self.pos += kws[i].len();
        Some(i)
    }

    fn expect(&mut self, kw: &str) -> PResult<()> {
        if self.eat(kw) {
            Ok(())
        } else {
            Err(ParseError::syntax(format!(
                "expected `{kw}` at `{}`",
                snippet(self.rest())
            )))
        }
    }

    fn eat_cmp(&mut self) -> Option<CmpOp> {
        self.skip_ws();
        for (sym, op) in CMP_SYMBOLS {
            if self.rest().starts_with(sym) {
                self.pos += sym.len();
                return Some(*op);
            }
        }
        for (word, op) in CMP_WORDS {
            if self.looking_at(word) {
                self.pos += word.len();
                return Some(*op);
            }
        }
        None
    }

    /// Matches a schema feature name at the cursor, optionally quoted.
    fn eat_feature(&mut self) -> Option<&'a FeatureDesc> {
        self.skip_ws();
        let start = self.pos;
        let quote = self.rest().chars().next().filter(|c| QUOTES.contains(c));
        if let Some(q) = quote {
            self.pos += q.len_utf8();
        }
        for &i in &self.by_length {
            let feature = &self.schema.features()[i];
            if self.looking_at(&feature.name) {
                self.pos += feature.name.len();
                if quote.is_some() {
                    match self.rest().chars().next() {
                        Some(c) if QUOTES.contains(&c) => self.pos += c.len_utf8(),
                        _ => {
                            self.pos = start;
                            return None;
                        }
                    }
                }
                return Some(feature);
            }
        }
        self.pos = start;
        None
    }

    fn eat_number(&mut self) -> Option<f64> {
        self.skip_ws();
        let rest = self.rest();
        let bytes = rest.as_bytes();
        let mut end = 0;
        if end < bytes.len() && (bytes[end] == b'-' || bytes[end] == b'+') {
            end += 1;
        }
        let digits_start = end;
        while end < bytes.len() && bytes[end].is_ascii_digit() {
            end += 1;
        }
        if end < bytes.len() && bytes[end] == b'.' {
            let mut frac = end + 1;
            while frac < bytes.len() && bytes[frac].is_ascii_digit() {
                frac += 1;
            }
            if frac > end + 1 || end > digits_start {
                end = frac;
            }
        }
        let has_digits = rest[digits_start..end].bytes().any(|b| b.is_ascii_digit());
        if !has_digits {
            return None;
        }
        if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
            let mut exp = end + 1;
            if exp < bytes.len() && (bytes[exp] == b'-' || bytes[exp] == b'+') {
                exp += 1;
            }
            let exp_digits = exp;
            while exp < bytes.len() && bytes[exp].is_ascii_digit() {
                exp += 1;
            }
            if exp > exp_digits {
                end = exp;
            }
        }
        // "5more" is a word, not a number
        if rest[end..].chars().next().is_some_and(|c| c.is_alphabetic() || c == '_') {
            return None;
        }
        let value: f64 = rest[..end].parse().ok()?;
        if !value.is_finite() {
            return None;
        }
        self.pos += end;
        Some(value)
    }

    fn word_here(&mut self) -> &'a str {
        self.skip_ws();
        let rest = self.rest();
        let end = rest
            .char_indices()
            .find(|&(_, c)| !is_word_char(c))
            .map_or(rest.len(), |(i, _)| i);
        &rest[..end]
    }

    fn parse_or(&mut self) -> PResult<Rule> {
        let mut members = vec![self.parse_and()?];
        while self.eat_any(OR_WORDS).is_some() {
            members.push(self.parse_and()?);
        }
        Ok(if members.len() == 1 {
            members.pop().unwrap()
        } else {
            Rule::Or(members)
        })
    }

    fn parse_and(&mut self) -> PResult<Rule> {
        let mut members = vec![self.parse_atom()?];
        loop {
            if self.eat_any(AND_WORDS).is_none() {
                break;
            }
            members.push(self.parse_atom()?);
        }
        Ok(if members.len() == 1 {
            members.pop().unwrap()
        } else {
            Rule::And(members)
        })
    }

    fn parse_atom(&mut self) -> PResult<Rule> {
        if self.peek() == Some('(') {
            let save = self.pos;
            if let Some(rule) = self.try_group() {
                return Ok(rule);
            }
            self.pos = save;
        }
        self.parse_condition()
    }

    /// `( rule )` not followed by an arithmetic or comparison operator.
    fn try_group(&mut self) -> Option<Rule> {
        self.expect("(").ok()?;
        let inner = self.parse_or().ok()?;
        self.expect(")").ok()?;
        self.skip_ws();
        let continues_expr = matches!(
            self.rest().chars().next(),
            Some('+' | '-' | '*' | '/' | '×' | '÷')
        );
        let save = self.pos;
        let continues_cmp = self.eat_cmp().is_some();
        self.pos = save;
        (!continues_expr && !continues_cmp).then_some(inner)
    }

    fn parse_condition(&mut self) -> PResult<Rule> {
        let start = self.pos;
        if let Some(feature) = self.eat_feature() {
            if let Some(rule) = self.feature_condition(feature)? {
                return Ok(rule);
            }
            self.pos = start;
        }
        self.comparison()
    }

    /// Forms that start with a feature name. Returns `None` to fall back to a
    /// general comparison.
    fn feature_condition(&mut self, feature: &'a FeatureDesc) -> PResult<Option<Rule>> {
        let name = feature.name.as_str();
        let categorical = feature.kind == FeatureKind::Categorical;

        if self.eat_any(RANGE_WORDS).is_some() {
            if categorical {
                return Err(type_mismatch(name, "a numeric range"));
            }
            let (lo, hi) = self.range_bounds()?;
            return Ok(Some(make_range(name, lo, hi)));
        }
        if self.eat_any(BETWEEN_WORDS).is_some() {
            if categorical {
                return Err(type_mismatch(name, "a numeric range"));
            }
            let (lo, hi) = if self.peek() == Some('[') {
                self.range_bounds()?
            } else {
                let lo = self.number_or_err()?;
                if self.eat_any(&["and", "to", "-"]).is_none() {
                    return Err(ParseError::syntax("expected `and` in `between` range"));
                }
                (lo, self.number_or_err()?)
            };
            return Ok(Some(make_range(name, lo, hi)));
        }
        if self.eat_any(NOT_MEMBER_WORDS).is_some() {
            let items = self.list_items()?;
            return self.membership(feature, &items, true).map(Some);
        }
        {
            let save = self.pos;
            if self.eat_any(MEMBER_WORDS).is_some() {
                if matches!(self.peek(), Some('[' | '{')) {
                    let items = self.list_items()?;
                    return self.membership(feature, &items, false).map(Some);
                }
                self.pos = save;
            }
        }
        // "RestingBP (< 140)"
        if self.peek() == Some('(') {
            let save = self.pos;
            self.pos += 1;
            if let Some(op) = self.eat_cmp() {
                if categorical {
                    return Err(type_mismatch(name, "a numeric comparison"));
                }
                let right = self.parse_expr()?;
                self.expect(")")?;
                return Ok(Some(Rule::cmp(Expr::feature(name), op, right)));
            }
            self.pos = save;
        }
        if categorical {
            if self.eat_any(CAT_NE_WORDS).is_some() {
                let item = self.category_token(feature)?;
                return self.membership(feature, &[item], true).map(Some);
            }
            if self.eat_any(CAT_EQ_WORDS).is_some() {
                if matches!(self.peek(), Some('[' | '{')) {
                    let items = self.list_items()?;
                    return self.membership(feature, &items, false).map(Some);
                }
                let item = self.category_token(feature)?;
                return self.membership(feature, &[item], false).map(Some);
            }
            let save = self.pos;
            if self.eat_cmp().is_some() {
                return Err(type_mismatch(name, "a numeric comparison"));
            }
            self.pos = save;
            return Err(ParseError::syntax(format!(
                "unrecognised condition on `{name}` at `{}`",
                snippet(self.rest())
            )));
        }
        Ok(None)
    }

    fn number_or_err(&mut self) -> PResult<f64> {
        self.eat_number()
            .ok_or_else(|| ParseError::syntax(format!("expected a number at `{}`", snippet(self.rest()))))
    }

    fn range_bounds(&mut self) -> PResult<(f64, f64)> {
        let close = match self.peek() {
            Some('[') => ']',
            Some('(') => ')',
            _ => {
                return Err(ParseError::syntax(format!(
                    "expected `[` at `{}`",
                    snippet(self.rest())
                )))
            }
        };
        self.pos += 1;
        let lo = self.number_or_err()?;
        if self.eat_any(&[",", "to", "and"]).is_none() {
            return Err(ParseError::syntax("expected `,` between range bounds"));
        }
        let hi = self.number_or_err()?;
        self.skip_ws();
        if !self.eat(&close.to_string()) {
            return Err(ParseError::syntax(format!("expected `{close}` after range")));
        }
        Ok((lo, hi))
    }

    /// Raw comma-separated items of a `[...]` or `{...}` list.
    fn list_items(&mut self) -> PResult<Vec<String>> {
        let close = match self.peek() {
            Some('[') => ']',
            Some('{') => '}',
            _ => return Err(ParseError::syntax("expected a `[...]` list")),
        };
        self.pos += 1;
        let rest = self.rest();
        let end = rest
            .find(close)
            .ok_or_else(|| ParseError::syntax(format!("unterminated list, missing `{close}`")))?;
        let body = &rest[..end];
        self.pos += end + close.len_utf8();
        Ok(body
            .split(',')
            .map(|s| s.trim().trim_matches(QUOTES).trim().to_owned())
            .filter(|s| !s.is_empty())
            .collect())
    }

    /// A single category after `is` / `=`: the longest matching category
    /// spelling, else one (possibly quoted) word.
    fn category_token(&mut self, feature: &FeatureDesc) -> PResult<String> {
        self.skip_ws();
        let quote = self.rest().chars().next().filter(|c| QUOTES.contains(c));
        if let Some(q) = quote {
            // quoted: take everything up to the next quote character
            self.pos += q.len_utf8();
            let rest = self.rest();
            let end = rest
                .find(QUOTES)
                .ok_or_else(|| ParseError::syntax("unterminated quoted value"))?;
            let item = rest[..end].trim().to_owned();
            self.pos += end;
            let closing = self.rest().chars().next().unwrap();
            self.pos += closing.len_utf8();
            return Ok(item);
        }
        let mut cats: Vec<&String> = feature.categories.iter().collect();
        cats.sort_by_key(|c| std::cmp::Reverse(c.len()));
        for c in cats {
            if self.looking_at(c) {
                self.pos += c.len();
                return Ok(c.clone());
            }
        }
        let word = self.word_here();
        if word.is_empty() {
            return Err(ParseError::syntax(format!(
                "expected a category value at `{}`",
                snippet(self.rest())
            )));
        }
        self.pos += word.len();
        Ok(word.to_owned())
    }

    fn membership(&self, feature: &FeatureDesc, items: &[String], negated: bool) -> PResult<Rule> {
        let name = feature.name.as_str();
        match feature.kind {
            FeatureKind::Categorical => {
                let mut values: Vec<String> = Vec::new();
                for item in items {
                    match feature.match_category(item) {
                        Some(c) if !values.iter().any(|v| v == c) => values.push(c.to_owned()),
                        Some(_) => {}
                        None => log::warn!("`{item}` is not a category of `{name}`; ignored"),
                    }
                }
                if negated {
                    values = feature
                        .categories
                        .iter()
                        .filter(|c| !values.contains(c))
                        .cloned()
                        .collect();
                }
                if values.is_empty() {
                    return Err(ParseError::new(
                        ParseErrorKind::EmptyMembership,
                        format!("no valid categories for `{name}`"),
                    ));
                }
                Ok(Rule::CatIn {
                    feature: name.to_owned(),
                    values,
                })
            }
            FeatureKind::Numerical => {
                // numeric-set membership: a chain of equality tests
                let mut numbers: Vec<f64> = Vec::new();
                for item in items {
                    let v: f64 = item
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| type_mismatch(name, &format!("the category `{item}`")))?;
                    if !numbers.contains(&v) {
                        numbers.push(v);
                    }
                }
                let op = if negated { CmpOp::Ne } else { CmpOp::Eq };
                let mut tests: Vec<Rule> = numbers
                    .into_iter()
                    .map(|v| Rule::threshold(name, op, v))
                    .collect();
                match tests.len() {
                    0 => Err(ParseError::new(
                        ParseErrorKind::EmptyMembership,
                        format!("empty value list for `{name}`"),
                    )),
                    1 => Ok(tests.pop().unwrap()),
                    _ if negated => Ok(Rule::And(tests)),
                    _ => Ok(Rule::Or(tests)),
                }
            }
        }
    }

    fn comparison(&mut self) -> PResult<Rule> {
        let left = self.parse_expr()?;
        let op = self.eat_cmp().ok_or_else(|| {
            ParseError::syntax(format!(
                "expected a comparison operator at `{}`",
                snippet(self.rest())
            ))
        })?;
        let right = self.parse_expr()?;
        let save = self.pos;
        // chained form "40 <= Age <= 60"
        if let Some(op2) = self.eat_cmp() {
            let third = self.parse_expr()?;
            return Ok(Rule::And(vec![
                Rule::cmp(left, op, right.clone()),
                Rule::cmp(right, op2, third),
            ]));
        }
        self.pos = save;
        Ok(Rule::cmp(left, op, right))
    }

    fn parse_expr(&mut self) -> PResult<Expr> {
        let mut left = self.parse_term()?;
        loop {
            self.skip_ws();
            let op = match self.rest().chars().next() {
                Some('+') => BinOp::Add,
                // "->" and "- " before a bullet never occur inside a rule
                Some('-' | '−') => BinOp::Sub,
                _ => break,
            };
            self.pos += self.rest().chars().next().unwrap().len_utf8();
            let right = self.parse_term()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn parse_term(&mut self) -> PResult<Expr> {
        let mut left = self.parse_unary()?;
        loop {
            self.skip_ws();
            let op = match self.rest().chars().next() {
                Some('*' | '×') => BinOp::Mul,
                Some('/' | '÷') => BinOp::Div,
                _ => break,
            };
            self.pos += self.rest().chars().next().unwrap().len_utf8();
            let right = self.parse_unary()?;
            left = Expr::binary(op, left, right);
        }
        Ok(left)
    }

    fn parse_unary(&mut self) -> PResult<Expr> {
        if let Some(v) = self.eat_number() {
            return Ok(Expr::Const(v));
        }
        match self.peek() {
            Some('-' | '−') => {
                self.pos += self.rest().chars().next().unwrap().len_utf8();
                let inner = self.parse_unary()?;
                Ok(match inner {
                    Expr::Const(v) => Expr::Const(-v),
                    other => Expr::binary(BinOp::Sub, Expr::Const(0.0), other),
                })
            }
            Some('(') => {
                self.pos += 1;
                let inner = self.parse_expr()?;
                self.expect(")")?;
                Ok(inner)
            }
            Some(_) => {
                if let Some(f) = self.eat_feature() {
                    if f.kind == FeatureKind::Categorical {
                        return Err(type_mismatch(&f.name, "arithmetic"));
                    }
                    return Ok(Expr::Feature(f.name.clone()));
                }
                let word = self.word_here();
                if word.chars().next().is_some_and(char::is_alphabetic) {
                    Err(ParseError::new(
                        ParseErrorKind::UnknownFeature,
                        format!("`{word}` is not a feature"),
                    ))
                } else {
                    Err(ParseError::syntax(format!(
                        "unexpected input at `{}`",
                        snippet(self.rest())
                    )))
                }
            }
            None => Err(ParseError::syntax("unexpected end of rule")),
        }
    }
}

fn type_mismatch(feature: &str, what: &str) -> ParseError {
    ParseError::new(
        ParseErrorKind::TypeMismatch,
        format!("`{feature}` cannot be used with {what}"),
    )
}

fn make_range(feature: &str, lo: f64, hi: f64) -> Rule {
    if lo > hi {
        log::warn!("range [{lo}, {hi}] on `{feature}` has reversed bounds; swapped");
        Rule::range(feature, hi, lo)
    } else {
        Rule::range(feature, lo, hi)
    }
}

fn snippet(s: &str) -> String {
    let s: String = s.chars().take(24).collect();
    if s.is_empty() {
        "<end>".into()
    } else {
        s
    }
}

/// Strips list bullets, numbering, markdown emphasis and trailing
/// punctuation around a rule line.
fn clean_line(line: &str) -> &str {
    let mut s = line.trim();
    // a "-" glued to a digit is a sign, not a bullet
    let glued_sign = s.starts_with('-') && s[1..].starts_with(|c: char| c.is_ascii_digit() || c == '.');
    if !glued_sign {
        for bullet in ["-", "* ", "•"] {
            if let Some(rest) = s.strip_prefix(bullet) {
                s = rest.trim_start();
                break;
            }
        }
    }
    // "1. " / "2) " numbering
    let digits = s.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 && digits < 4 {
        let after = &s[digits..];
        if let Some(rest) = after.strip_prefix(". ").or_else(|| after.strip_prefix(") ")) {
            s = rest.trim_start();
        }
    }
    loop {
        let before = s;
        s = s.trim();
        if let Some(inner) = s.strip_prefix("**").and_then(|x| x.strip_suffix("**")) {
            s = inner;
        }
        if let Some(inner) = s.strip_prefix('`').and_then(|x| x.strip_suffix('`')) {
            s = inner;
        }
        s = s.trim_end_matches([';', ',']);
        if let Some(stripped) = s.strip_suffix('.') {
            s = stripped;
        }
        if s == before {
            return s;
        }
    }
}

/// Parses one rule line. Never panics; every failure is a classified
/// [`ParseError`].
pub fn parse_rule(line: &str, schema: &FeatureSchema) -> Result<Rule, ParseError> {
    let text = clean_line(line);
    if text.is_empty() {
        return Err(ParseError::syntax("empty rule"));
    }
    let mut p = Parser::new(text, schema);
    let rule = p.parse_or()?;
    if !p.at_end() {
        return Err(ParseError::syntax(format!(
            "unexpected trailing input `{}`",
            snippet(p.rest())
        )));
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::FeatureDesc;

    fn schema() -> FeatureSchema {
        FeatureSchema::new(vec![
            FeatureDesc::numerical("Age", None),
            FeatureDesc::categorical("Sex", None, &["M", "F"]),
            FeatureDesc::numerical("RestingBP", None),
            FeatureDesc::numerical("MaxHR", None),
            FeatureDesc::numerical("BMI", None),
            FeatureDesc::numerical("FastingBS", None),
            FeatureDesc::categorical("doors", None, &["2", "3", "4", "5more"]),
            FeatureDesc::categorical("buying", None, &["low", "medium", "high", "very high"]),
        ])
        .unwrap()
    }

    fn kind(line: &str) -> ParseErrorKind {
        parse_rule(line, &schema()).unwrap_err().kind
    }

    #[test]
    fn recorded_response_forms() {
        let s = schema();
        assert_eq!(
            parse_rule("- Age is within range of [40, 60]", &s).unwrap(),
            Rule::range("Age", 40.0, 60.0)
        );
        assert_eq!(
            parse_rule("- RestingBP (< 140)", &s).unwrap(),
            Rule::threshold("RestingBP", CmpOp::Lt, 140.0)
        );
        assert_eq!(parse_rule("- Sex is in [F]", &s).unwrap(), Rule::cat_in("Sex", &["F"]));
        assert_eq!(
            parse_rule("- FastingBS is in [0]", &s).unwrap(),
            Rule::threshold("FastingBS", CmpOp::Eq, 0.0)
        );
    }

    #[test]
    fn synonyms() {
        let s = schema();
        let gt = Rule::threshold("MaxHR", CmpOp::Gt, 140.0);
        assert_eq!(parse_rule("- MaxHR greater than 140", &s).unwrap(), gt);
        assert_eq!(parse_rule("MaxHR is greater than 140", &s).unwrap(), gt);
        assert_eq!(
            parse_rule("age at least 40", &s).unwrap(),
            Rule::threshold("Age", CmpOp::Ge, 40.0)
        );
        assert_eq!(
            parse_rule("Age is less than or equal to 40", &s).unwrap(),
            Rule::threshold("Age", CmpOp::Le, 40.0)
        );
        assert_eq!(
            parse_rule("Age is 50", &s).unwrap(),
            Rule::threshold("Age", CmpOp::Eq, 50.0)
        );
        assert_eq!(
            parse_rule("Age ≥ 50", &s).unwrap(),
            Rule::threshold("Age", CmpOp::Ge, 50.0)
        );
    }

    #[test]
    fn categorical_equality_forms() {
        let s = schema();
        assert_eq!(parse_rule("Sex = m", &s).unwrap(), Rule::cat_in("Sex", &["M"]));
        assert_eq!(parse_rule("Sex is 'F'", &s).unwrap(), Rule::cat_in("Sex", &["F"]));
        assert_eq!(
            parse_rule("buying = very high", &s).unwrap(),
            Rule::cat_in("buying", &["very high"])
        );
        assert_eq!(
            parse_rule("doors in [4, 5more]", &s).unwrap(),
            Rule::cat_in("doors", &["4", "5more"])
        );
        assert_eq!(
            parse_rule("buying not in [low, medium]", &s).unwrap(),
            Rule::cat_in("buying", &["high", "very high"])
        );
    }

    #[test]
    fn boolean_combinators() {
        let s = schema();
        assert_eq!(
            parse_rule("- BMI >= 30 & Age >= 40", &s).unwrap(),
            Rule::And(vec![
                Rule::threshold("BMI", CmpOp::Ge, 30.0),
                Rule::threshold("Age", CmpOp::Ge, 40.0),
            ])
        );
        // AND binds tighter than OR
        assert_eq!(
            parse_rule("Age > 1 OR Age < 0 and BMI > 2", &s).unwrap(),
            Rule::Or(vec![
                Rule::threshold("Age", CmpOp::Gt, 1.0),
                Rule::And(vec![
                    Rule::threshold("Age", CmpOp::Lt, 0.0),
                    Rule::threshold("BMI", CmpOp::Gt, 2.0),
                ]),
            ])
        );
        assert_eq!(
            parse_rule("(Age > 1 or Age < 0) and Sex is in [M]", &s).unwrap(),
            Rule::And(vec![
                Rule::Or(vec![
                    Rule::threshold("Age", CmpOp::Gt, 1.0),
                    Rule::threshold("Age", CmpOp::Lt, 0.0),
                ]),
                Rule::cat_in("Sex", &["M"]),
            ])
        );
    }

    #[test]
    fn arithmetic_precedence() {
        let s = schema();
        let r = parse_rule("(Age + BMI) * 2 - MaxHR / 4 > 3", &s).unwrap();
        let expected = Rule::cmp(
            Expr::binary(
                BinOp::Sub,
                Expr::binary(
                    BinOp::Mul,
                    Expr::binary(BinOp::Add, Expr::feature("Age"), Expr::feature("BMI")),
                    Expr::Const(2.0),
                ),
                Expr::binary(BinOp::Div, Expr::feature("MaxHR"), Expr::Const(4.0)),
            ),
            CmpOp::Gt,
            Expr::Const(3.0),
        );
        assert_eq!(r, expected);
    }

    #[test]
    fn reversed_range_swapped() {
        assert_eq!(
            parse_rule("Age is within range of [60, 40]", &schema()).unwrap(),
            Rule::range("Age", 40.0, 60.0)
        );
        assert_eq!(
            parse_rule("Age between 40 and 60", &schema()).unwrap(),
            Rule::range("Age", 40.0, 60.0)
        );
    }

    #[test]
    fn error_classes() {
        assert_eq!(kind("Weight > 3"), ParseErrorKind::UnknownFeature);
        assert_eq!(kind("Sex > 3"), ParseErrorKind::TypeMismatch);
        assert_eq!(kind("Sex is within range of [1, 2]"), ParseErrorKind::TypeMismatch);
        assert_eq!(kind("Age is in [young]"), ParseErrorKind::TypeMismatch);
        assert_eq!(kind("Sex is in [X, Y]"), ParseErrorKind::EmptyMembership);
        assert_eq!(kind("Sex is in []"), ParseErrorKind::EmptyMembership);
        assert_eq!(kind("Age >"), ParseErrorKind::MalformedSyntax);
        assert_eq!(kind("Age > 3 extra"), ParseErrorKind::MalformedSyntax);
        assert_eq!(kind("..."), ParseErrorKind::MalformedSyntax);
        assert_eq!(kind(""), ParseErrorKind::MalformedSyntax);
        assert_eq!(kind("Age is within range of [1, 2"), ParseErrorKind::MalformedSyntax);
    }

    #[test]
    fn bullets_and_trailing_punctuation() {
        let s = schema();
        let r = Rule::threshold("Age", CmpOp::Lt, 1.0);
        assert_eq!(parse_rule("1. Age < 1.", &s).unwrap(), r);
        assert_eq!(parse_rule("  - **Age < 1.0**  ", &s).unwrap(), r);
        assert_eq!(parse_rule("`Age < 1`;", &s).unwrap(), r);
    }
}
