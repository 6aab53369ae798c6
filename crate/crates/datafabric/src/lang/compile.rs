//! Compilation of parsed requests against the functional block registry.
//! A compiled request carries no addressing information at all: keywords,
//! conditions, and an operation name are the whole wire payload.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::dpu::blocks::{ArgKind, Registry};
use crate::fabric::FieldValue;
use crate::lang::ast::{ArgAst, Comparator, MatchMode, RequestAst};
use crate::lang::CompileError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub field: String,
    pub cmp: Comparator,
    pub literal: FieldValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arg {
    Field(String),
    Literal(FieldValue),
}

/// A validated request, ready to broadcast. Requests never name records,
/// coordinates, or unit identities; content addressing is keywords only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub request_id: u64,
    pub mode: MatchMode,
    pub keywords: BTreeSet<String>,
    pub conditions: Vec<Condition>,
    pub op: String,
    pub args: Vec<Arg>,
}

fn literal_size(v: &FieldValue) -> usize {
    match v {
        FieldValue::Int(_) | FieldValue::Real(_) => 8,
        FieldValue::Text(s) => s.len() + 1,
    }
}

impl Request {
    /// Modeled size of the request body in bytes: one mode byte, then
    /// length-prefixed keywords, conditions (field, one comparator byte,
    /// literal), the operation name, and its arguments.
    pub fn body_size(&self) -> usize {
        let mut size = 1;
        for kw in &self.keywords {
            size += kw.len() + 1;
        }
        for cond in &self.conditions {
            size += cond.field.len() + 1 + 1 + literal_size(&cond.literal);
        }
        size += self.op.len() + 1;
        for arg in &self.args {
            size += match arg {
                Arg::Field(name) => name.len() + 1,
                Arg::Literal(v) => literal_size(v),
            };
        }
        size
    }
}

/// Session-scoped compiler. Request ids count up from 1 and are never reused
/// within a session, so traces from one session never collide.
#[derive(Debug)]
pub struct Compiler {
    registry: Registry,
    next_id: u64,
}

impl Compiler {
    pub fn new(registry: Registry) -> Self {
        Self { registry, next_id: 1 }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn compile(&mut self, ast: &RequestAst) -> Result<Request, CompileError> {
        let block = self.registry.lookup(&ast.op).ok_or_else(|| CompileError {
            line: ast.op_span.line,
            col: ast.op_span.col,
            message: format!("unknown operation \"{}\"", ast.op),
        })?;

        let signature = block.signature;
        if ast.args.len() != signature.len() {
            return Err(CompileError {
                line: ast.op_span.line,
                col: ast.op_span.col,
                message: format!(
                    "{} takes {} argument{}, got {}",
                    ast.op,
                    signature.len(),
                    if signature.len() == 1 { "" } else { "s" },
                    ast.args.len()
                ),
            });
        }

        let mut args = Vec::with_capacity(ast.args.len());
        for (arg, expected) in ast.args.iter().zip(signature) {
            match (expected, arg) {
                (ArgKind::Field, ArgAst::Field(name, _)) => {
                    args.push(Arg::Field(name.clone()));
                }
                (ArgKind::Number, ArgAst::Literal(v @ FieldValue::Int(_), _))
                | (ArgKind::Number, ArgAst::Literal(v @ FieldValue::Real(_), _)) => {
                    args.push(Arg::Literal(v.clone()));
                }
                (ArgKind::Field, other) => {
                    let span = arg_span(other);
                    return Err(CompileError {
                        line: span.0,
                        col: span.1,
                        message: format!("{} expects a field name here", ast.op),
                    });
                }
                (ArgKind::Number, other) => {
                    let span = arg_span(other);
                    return Err(CompileError {
                        line: span.0,
                        col: span.1,
                        message: format!("{} expects a numeric literal here", ast.op),
                    });
                }
            }
        }

        let keywords: BTreeSet<String> =
            ast.keywords.iter().map(|(kw, _)| kw.to_lowercase()).collect();

        let conditions = ast
            .conditions
            .iter()
            .map(|c| Condition {
                field: c.field.clone(),
                cmp: c.cmp,
                literal: c.literal.clone(),
            })
            .collect();

        let request_id = self.next_id;
        self.next_id += 1;

        Ok(Request {
            request_id,
            mode: ast.mode,
            keywords,
            conditions,
            op: ast.op.clone(),
            args,
        })
    }
}

fn arg_span(arg: &ArgAst) -> (u32, u32) {
    match arg {
        ArgAst::Field(_, s) | ArgAst::Literal(_, s) => (s.line, s.col),
    }
}

/// True when a record satisfies every condition. A record missing the field,
/// or holding a value of a different kind than the literal, never matches.
pub fn conditions_hold(
    fields: &std::collections::BTreeMap<String, FieldValue>,
    conditions: &[Condition],
) -> bool {
    conditions.iter().all(|cond| {
        let Some(value) = fields.get(&cond.field) else {
            return false;
        };
        let Some(ordering) = value.compare(&cond.literal) else {
            return false;
        };
        match cond.cmp {
            Comparator::Eq => ordering.is_eq(),
            Comparator::Ne => !ordering.is_eq(),
            Comparator::Lt => ordering.is_lt(),
            Comparator::Le => !ordering.is_gt(),
            Comparator::Gt => ordering.is_gt(),
            Comparator::Ge => !ordering.is_lt(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpu::blocks::Registry;
    use crate::lang::parser::parse_request;
    use std::collections::BTreeMap;

    fn compile_text(text: &str) -> Result<Request, CompileError> {
        let ast = parse_request(text).unwrap();
        Compiler::new(Registry::standard()).compile(&ast)
    }

    #[test]
    fn compiles_and_lowercases_keywords() {
        let req = compile_text("MATCH ANY(Sensor, TEMP) APPLY count;").unwrap();
        assert_eq!(req.request_id, 1);
        assert!(req.keywords.contains("sensor"));
        assert!(req.keywords.contains("temp"));
        assert_eq!(req.keywords.len(), 2);
    }

    #[test]
    fn request_ids_count_up_per_session() {
        let mut compiler = Compiler::new(Registry::standard());
        let a = parse_request("MATCH ANY(a) APPLY count;").unwrap();
        let b = parse_request("MATCH ANY(b) APPLY count;").unwrap();
        assert_eq!(compiler.compile(&a).unwrap().request_id, 1);
        assert_eq!(compiler.compile(&b).unwrap().request_id, 2);
    }

    #[test]
    fn rejects_unknown_operation() {
        let err = compile_text("MATCH ANY(a) APPLY frobnicate;").unwrap_err();
        assert_eq!(err.message, "unknown operation \"frobnicate\"");
        assert_eq!((err.line, err.col), (1, 20));
    }

    #[test]
    fn rejects_wrong_arity_and_kind() {
        let err = compile_text("MATCH ANY(a) APPLY count(value);").unwrap_err();
        assert_eq!(err.message, "count takes 0 arguments, got 1");
        let err = compile_text("MATCH ANY(a) APPLY sum;").unwrap_err();
        assert_eq!(err.message, "sum takes 1 argument, got 0");
        let err = compile_text("MATCH ANY(a) APPLY sum(3);").unwrap_err();
        assert_eq!(err.message, "sum expects a field name here");
        let err = compile_text("MATCH ANY(a) APPLY scale(value, \"x\");").unwrap_err();
        assert_eq!(err.message, "scale expects a numeric literal here");
    }

    #[test]
    fn body_size_counts_every_component() {
        let req = compile_text("MATCH ANY(temp) WHERE value >= 30 APPLY count;").unwrap();
        // mode 1 + "temp"+1 = 5 + cond("value"+1=6, cmp 1, int 8) + "count"+1 = 6
        assert_eq!(req.body_size(), 1 + 5 + 15 + 6);
    }

    #[test]
    fn condition_semantics_exclude_missing_and_mismatched() {
        let req =
            compile_text("MATCH ANY(a) WHERE value >= 30 APPLY count;").unwrap();
        let mut with_int = BTreeMap::new();
        with_int.insert("value".to_string(), FieldValue::Int(31));
        assert!(conditions_hold(&with_int, &req.conditions));

        let mut with_real = BTreeMap::new();
        with_real.insert("value".to_string(), FieldValue::Real(31.0));
        assert!(!conditions_hold(&with_real, &req.conditions));

        let empty = BTreeMap::new();
        assert!(!conditions_hold(&empty, &req.conditions));
    }

    #[test]
    fn serialized_requests_carry_no_addressing() {
        let req = compile_text("MATCH ALL(sensor, temp) APPLY sum(value);").unwrap();
        let wire = serde_json::to_string(&req).unwrap();
        for word in ["coord", "dpu", "route", "location", "address"] {
            assert!(!wire.contains(word), "wire form leaked {word}: {wire}");
        }
    }
}
