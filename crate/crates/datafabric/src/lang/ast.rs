//! Syntax tree for parsed requests, plus a pretty-printer whose output
//! reparses to a structurally identical tree.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::fabric::FieldValue;

/// Source position of a token, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Self { line, col }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Any,
    All,
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchMode::Any => write!(f, "ANY"),
            MatchMode::All => write!(f, "ALL"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Comparator {
    pub fn as_str(self) -> &'static str {
        match self {
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
        }
    }

    /// Equality comparators apply to any literal; ordered ones only to numbers.
    pub fn is_ordered(self) -> bool {
        !matches!(self, Comparator::Eq | Comparator::Ne)
    }
}

#[derive(Debug, Clone)]
pub struct ConditionAst {
    pub field: String,
    pub field_span: Span,
    pub cmp: Comparator,
    pub cmp_span: Span,
    pub literal: FieldValue,
    pub literal_span: Span,
}

#[derive(Debug, Clone)]
pub enum ArgAst {
    Field(String, Span),
    Literal(FieldValue, Span),
}

#[derive(Debug, Clone)]
pub struct RequestAst {
    pub span: Span,
    pub mode: MatchMode,
    pub keywords: Vec<(String, Span)>,
    pub conditions: Vec<ConditionAst>,
    pub op: String,
    pub op_span: Span,
    pub args: Vec<ArgAst>,
}

fn literal_text(v: &FieldValue) -> String {
    match v {
        FieldValue::Int(i) => i.to_string(),
        FieldValue::Real(r) => format!("{r:?}"),
        FieldValue::Text(s) => format!("\"{s}\""),
    }
}

impl RequestAst {
    /// Canonical single-line rendering: `MATCH mode(k, ...) WHERE ... APPLY op(...);`
    pub fn pretty(&self) -> String {
        let mut out = String::new();
        out.push_str("MATCH ");
        out.push_str(&self.mode.to_string());
        out.push('(');
        for (i, (kw, _)) in self.keywords.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            out.push_str(kw);
        }
        out.push(')');
        if !self.conditions.is_empty() {
            out.push_str(" WHERE ");
            for (i, cond) in self.conditions.iter().enumerate() {
                if i > 0 {
                    out.push_str(" AND ");
                }
                out.push_str(&cond.field);
                out.push(' ');
                out.push_str(cond.cmp.as_str());
                out.push(' ');
                out.push_str(&literal_text(&cond.literal));
            }
        }
        out.push_str(" APPLY ");
        out.push_str(&self.op);
        if !self.args.is_empty() {
            out.push('(');
            for (i, arg) in self.args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                match arg {
                    ArgAst::Field(name, _) => out.push_str(name),
                    ArgAst::Literal(v, _) => out.push_str(&literal_text(v)),
                }
            }
            out.push(')');
        }
        out.push(';');
        out
    }

    /// Equality over everything except spans. Real literals compare by bits
    /// so that round-trips through `{:?}` formatting stay exact.
    pub fn structurally_eq(&self, other: &RequestAst) -> bool {
        fn value_eq(a: &FieldValue, b: &FieldValue) -> bool {
            match (a, b) {
                (FieldValue::Int(x), FieldValue::Int(y)) => x == y,
                (FieldValue::Real(x), FieldValue::Real(y)) => x.to_bits() == y.to_bits(),
                (FieldValue::Text(x), FieldValue::Text(y)) => x == y,
                _ => false,
            }
        }
        self.mode == other.mode
            && self.keywords.len() == other.keywords.len()
            && self
                .keywords
                .iter()
                .zip(&other.keywords)
                .all(|((a, _), (b, _))| a == b)
            && self.conditions.len() == other.conditions.len()
            && self.conditions.iter().zip(&other.conditions).all(|(a, b)| {
                a.field == b.field && a.cmp == b.cmp && value_eq(&a.literal, &b.literal)
            })
            && self.op == other.op
            && self.args.len() == other.args.len()
            && self.args.iter().zip(&other.args).all(|(a, b)| match (a, b) {
                (ArgAst::Field(x, _), ArgAst::Field(y, _)) => x == y,
                (ArgAst::Literal(x, _), ArgAst::Literal(y, _)) => value_eq(x, y),
                _ => false,
            })
    }
}
