use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }
}

/// Arithmetic over numerical features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    Feature(String),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn feature(name: &str) -> Self {
        Expr::Feature(name.to_owned())
    }

    pub fn binary(op: BinOp, left: Expr, right: Expr) -> Self {
        Expr::Binary(op, Box::new(left), Box::new(right))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, ..) => op.precedence(),
            _ => 3,
        }
    }

    pub fn features<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Expr::Const(_) => {}
            Expr::Feature(f) => out.push(f),
            Expr::Binary(_, l, r) => {
                l.features(out);
                r.features(out);
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Feature(name) => f.write_str(name),
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                if l.precedence() < p {
                    write!(f, "({l})")?;
                } else {
                    write!(f, "{l}")?;
                }
                write!(f, " {} ", op.symbol())?;
                // left-associative: an equal-precedence right child needs parens
                if r.precedence() <= p {
                    write!(f, "({r})")
                } else {
                    write!(f, "{r}")
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }
}

/// A parsed condition.
///
/// `CatIn` applies to categorical features only and `NumRange` bounds are
/// inclusive with `lo <= hi`. `And`/`Or` hold at least two members.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Rule {
    CatIn { feature: String, values: Vec<String> },
    Cmp { left: Expr, op: CmpOp, right: Expr },
    NumRange { feature: String, lo: f64, hi: f64 },
    And(Vec<Rule>),
    Or(Vec<Rule>),
}

impl Rule {
    pub fn cat_in(feature: &str, values: &[&str]) -> Self {
        Rule::CatIn {
            feature: feature.to_owned(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn cmp(left: Expr, op: CmpOp, right: Expr) -> Self {
        Rule::Cmp { left, op, right }
    }

    /// `feature <op> value`
    pub fn threshold(feature: &str, op: CmpOp, value: f64) -> Self {
        Rule::cmp(Expr::feature(feature), op, Expr::Const(value))
    }

    pub fn range(feature: &str, lo: f64, hi: f64) -> Self {
        Rule::NumRange {
            feature: feature.to_owned(),
            lo,
            hi,
        }
    }

    /// Feature names referenced anywhere in the rule, with repeats.
    pub fn features(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Rule::CatIn { feature, .. } | Rule::NumRange { feature, .. } => out.push(feature),
            Rule::Cmp { left, right, .. } => {
                left.features(out);
                right.features(out);
            }
            Rule::And(rs) | Rule::Or(rs) => rs.iter().for_each(|r| r.collect_features(out)),
        }
    }
}

/// Canonical text form; parsing it yields an equal rule.
impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rule::CatIn { feature, values } => write!(f, "{feature} is in [{}]", values.join(", ")),
            Rule::Cmp { left, op, right } => write!(f, "{left} {} {right}", op.symbol()),
            Rule::NumRange { feature, lo, hi } => {
                write!(f, "{feature} is within range of [{lo}, {hi}]")
            }
            Rule::And(members) => join(f, members, " and ", |r| matches!(r, Rule::And(_) | Rule::Or(_))),
            Rule::Or(members) => join(f, members, " or ", |r| matches!(r, Rule::Or(_))),
        }
    }
}

fn join(
    f: &mut fmt::Formatter<'_>,
    members: &[Rule],
    sep: &str,
    needs_parens: impl Fn(&Rule) -> bool,
) -> fmt::Result {
    for (i, r) in members.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        if needs_parens(r) {
            write!(f, "({r})")?;
        } else {
            write!(f, "{r}")?;
        }
    }
    Ok(())
}

pub fn print_rule(rule: &Rule) -> String {
    rule.to_string()
}
