//! The functional block registry and in-place block execution. Blocks are
//! the only algorithms a request can name; `scale` is the only one that
//! mutates the store, and even it never touches keywords.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::dpu::View;
use crate::fabric::{FieldValue, Record};
use crate::lang::{Arg, Request};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArgKind {
    Field,
    Number,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Search,
    Count,
    Sum,
    Min,
    Max,
    Avg,
    Scale,
}

#[derive(Debug, Clone)]
pub struct FunctionalBlock {
    pub keyword: &'static str,
    pub kind: BlockKind,
    pub signature: &'static [ArgKind],
}

/// Fixed at startup; requests select from this set by keyword.
#[derive(Debug, Clone)]
pub struct Registry {
    blocks: BTreeMap<&'static str, FunctionalBlock>,
}

impl Registry {
    pub fn standard() -> Self {
        let blocks = [
            FunctionalBlock { keyword: "search", kind: BlockKind::Search, signature: &[] },
            FunctionalBlock { keyword: "count", kind: BlockKind::Count, signature: &[] },
            FunctionalBlock { keyword: "sum", kind: BlockKind::Sum, signature: &[ArgKind::Field] },
            FunctionalBlock { keyword: "min", kind: BlockKind::Min, signature: &[ArgKind::Field] },
            FunctionalBlock { keyword: "max", kind: BlockKind::Max, signature: &[ArgKind::Field] },
            FunctionalBlock { keyword: "avg", kind: BlockKind::Avg, signature: &[ArgKind::Field] },
            FunctionalBlock {
                keyword: "scale",
                kind: BlockKind::Scale,
                signature: &[ArgKind::Field, ArgKind::Number],
            },
        ];
        Self {
            blocks: blocks.into_iter().map(|b| (b.keyword, b)).collect(),
        }
    }

    pub fn lookup(&self, keyword: &str) -> Option<&FunctionalBlock> {
        self.blocks.get(keyword)
    }

    /// Resolves a compiled request's block. Total because compilation
    /// already validated the operation keyword.
    pub fn select_block(&self, request: &Request) -> &FunctionalBlock {
        self.lookup(&request.op)
            .expect("compiled request names a registered block")
    }

    pub fn keywords(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.blocks.keys().copied()
    }
}

/// What a block hands back. `sumcount` keeps averages exact across merging;
/// `empty` marks "nothing to report" (min/max of nothing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Payload {
    Ids(Vec<String>),
    Int(i64),
    Real(f64),
    SumCount { sum: f64, count: u64 },
    Empty,
}

impl Payload {
    /// Modeled payload size in bytes.
    pub fn byte_size(&self) -> u64 {
        match self {
            Payload::Ids(ids) => ids.iter().map(|id| id.len() as u64 + 1).sum(),
            Payload::Int(_) | Payload::Real(_) => 8,
            Payload::SumCount { .. } => 16,
            Payload::Empty => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialResult {
    pub request_id: u64,
    pub dpu: crate::fabric::DpuId,
    pub payload: Payload,
}

/// Result of running one block over one view.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub payload: Payload,
    /// View records skipped because the named field was missing or text
    /// where a number was needed. Surfaced in the run report.
    pub skipped: u64,
}

fn field_arg(args: &[Arg]) -> &str {
    match &args[0] {
        Arg::Field(name) => name,
        Arg::Literal(_) => unreachable!("compile checked the field argument"),
    }
}

fn numeric_values(
    store: &BTreeMap<String, Record>,
    view: &View,
    field: &str,
    skipped: &mut u64,
) -> Vec<FieldValue> {
    let mut values = Vec::new();
    for id in &view.ids {
        let record = &store[id];
        match record.fields.get(field) {
            Some(v @ FieldValue::Int(_)) | Some(v @ FieldValue::Real(_)) => {
                values.push(v.clone())
            }
            _ => *skipped += 1,
        }
    }
    values
}

fn sum_payload(values: &[FieldValue]) -> Payload {
    if values.iter().any(|v| matches!(v, FieldValue::Real(_))) {
        Payload::Real(values.iter().filter_map(|v| v.as_f64()).sum())
    } else {
        Payload::Int(
            values
                .iter()
                .map(|v| match v {
                    FieldValue::Int(i) => *i,
                    _ => 0,
                })
                .sum(),
        )
    }
}

/// Winner rule for min/max, shared by in-DPU extremes, initiator-side
/// merging, and the centralized evaluator: a strictly better value wins;
/// an exact tie prefers the integer representation. Order-independent, so
/// the winner never depends on which DPU reported first. Both sides are
/// `(numeric value, is-integer)`.
pub fn extreme_replaces(want_max: bool, current: (f64, bool), candidate: (f64, bool)) -> bool {
    if candidate.0 != current.0 {
        if want_max {
            candidate.0 > current.0
        } else {
            candidate.0 < current.0
        }
    } else {
        candidate.1 && !current.1
    }
}

fn rank(v: &FieldValue) -> (f64, bool) {
    (v.as_f64().unwrap(), matches!(v, FieldValue::Int(_)))
}

fn extreme_payload(values: &[FieldValue], want_max: bool) -> Payload {
    let mut best: Option<&FieldValue> = None;
    for v in values {
        let better = match best {
            None => true,
            Some(b) => extreme_replaces(want_max, rank(b), rank(v)),
        };
        if better {
            best = Some(v);
        }
    }
    match best {
        Some(FieldValue::Int(i)) => Payload::Int(*i),
        Some(FieldValue::Real(r)) => Payload::Real(*r),
        _ => Payload::Empty,
    }
}

/// Runs one functional block over a prepared view, in place. Only `scale`
/// writes to the store, and it leaves keywords (and thus the knowledge
/// index) untouched.
pub fn execute_block(
    store: &mut BTreeMap<String, Record>,
    block: &FunctionalBlock,
    view: &View,
    args: &[Arg],
) -> BlockOutcome {
    let mut skipped = 0u64;
    let payload = match block.kind {
        BlockKind::Search => Payload::Ids(view.ids.clone()),
        BlockKind::Count => Payload::Int(view.ids.len() as i64),
        BlockKind::Sum => sum_payload(&numeric_values(store, view, field_arg(args), &mut skipped)),
        BlockKind::Min => {
            extreme_payload(&numeric_values(store, view, field_arg(args), &mut skipped), false)
        }
        BlockKind::Max => {
            extreme_payload(&numeric_values(store, view, field_arg(args), &mut skipped), true)
        }
        BlockKind::Avg => {
            let values = numeric_values(store, view, field_arg(args), &mut skipped);
            Payload::SumCount {
                sum: values.iter().filter_map(|v| v.as_f64()).sum(),
                count: values.len() as u64,
            }
        }
        BlockKind::Scale => {
            let field = field_arg(args);
            let factor = match &args[1] {
                Arg::Literal(v) => v.clone(),
                Arg::Field(_) => unreachable!("compile checked the factor argument"),
            };
            let mut updated = 0i64;
            for id in &view.ids {
                let record = store.get_mut(id).expect("view ids are local");
                match record.fields.get_mut(field) {
                    Some(slot @ FieldValue::Int(_)) => {
                        let old = match slot {
                            FieldValue::Int(i) => *i,
                            _ => unreachable!(),
                        };
                        *slot = match &factor {
                            FieldValue::Int(k) => FieldValue::Int(old * k),
                            _ => FieldValue::Real(old as f64 * factor.as_f64().unwrap()),
                        };
                        updated += 1;
                    }
                    Some(slot @ FieldValue::Real(_)) => {
                        let old = match slot {
                            FieldValue::Real(r) => *r,
                            _ => unreachable!(),
                        };
                        *slot = FieldValue::Real(old * factor.as_f64().unwrap());
                        updated += 1;
                    }
                    _ => skipped += 1,
                }
            }
            Payload::Int(updated)
        }
    };
    BlockOutcome { payload, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::{register_record, ExtractionPolicy, RawRecord};

    fn store_of(raw: &[(&str, &[(&str, FieldValue)])]) -> BTreeMap<String, Record> {
        raw.iter()
            .map(|(id, fields)| {
                let record = register_record(
                    &RawRecord {
                        id: id.to_string(),
                        tags: vec!["t".into()],
                        fields: fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
                    },
                    ExtractionPolicy::ExplicitTags,
                )
                .unwrap();
                (id.to_string(), record)
            })
            .collect()
    }

    fn view_of(ids: &[&str]) -> View {
        View {
            ids: ids.iter().map(|s| s.to_string()).collect(),
            candidate_count: ids.len(),
        }
    }

    fn registry_block(kw: &str) -> FunctionalBlock {
        Registry::standard().lookup(kw).unwrap().clone()
    }

    #[test]
    fn registry_holds_the_seven_blocks() {
        let registry = Registry::standard();
        let kws: Vec<_> = registry.keywords().collect();
        assert_eq!(kws, ["avg", "count", "max", "min", "scale", "search", "sum"]);
        assert!(registry.lookup("frobnicate").is_none());
        assert_eq!(registry.lookup("scale").unwrap().signature.len(), 2);
    }

    #[test]
    fn count_and_search_over_views() {
        let mut store = store_of(&[("a", &[]), ("b", &[])]);
        let out = execute_block(&mut store, &registry_block("count"), &view_of(&["a", "b"]), &[]);
        assert_eq!(out.payload, Payload::Int(2));
        let out = execute_block(&mut store, &registry_block("search"), &view_of(&["a", "b"]), &[]);
        assert_eq!(out.payload, Payload::Ids(vec!["a".into(), "b".into()]));
        let out = execute_block(&mut store, &registry_block("count"), &view_of(&[]), &[]);
        assert_eq!(out.payload, Payload::Int(0));
    }

    #[test]
    fn sum_stays_integer_until_a_real_appears() {
        let mut store = store_of(&[
            ("a", &[("v", FieldValue::Int(30))]),
            ("b", &[("v", FieldValue::Int(35))]),
            ("c", &[("v", FieldValue::Real(0.5))]),
        ]);
        let args = [Arg::Field("v".into())];
        let out =
            execute_block(&mut store, &registry_block("sum"), &view_of(&["a", "b"]), &args);
        assert_eq!(out.payload, Payload::Int(65));
        let out =
            execute_block(&mut store, &registry_block("sum"), &view_of(&["a", "c"]), &args);
        assert_eq!(out.payload, Payload::Real(30.5));
        let out = execute_block(&mut store, &registry_block("sum"), &view_of(&[]), &args);
        assert_eq!(out.payload, Payload::Int(0));
    }

    #[test]
    fn min_max_avg_handle_empty_and_mixed() {
        let mut store = store_of(&[
            ("a", &[("v", FieldValue::Int(3))]),
            ("b", &[("v", FieldValue::Real(2.5))]),
            ("c", &[("v", FieldValue::Text("x".into()))]),
        ]);
        let args = [Arg::Field("v".into())];
        let out = execute_block(
            &mut store,
            &registry_block("min"),
            &view_of(&["a", "b", "c"]),
            &args,
        );
        assert_eq!(out.payload, Payload::Real(2.5));
        assert_eq!(out.skipped, 1);
        let out =
            execute_block(&mut store, &registry_block("max"), &view_of(&["a", "b"]), &args);
        assert_eq!(out.payload, Payload::Int(3));
        let out = execute_block(&mut store, &registry_block("min"), &view_of(&["c"]), &args);
        assert_eq!(out.payload, Payload::Empty);
        // exact numeric tie: the integer wins regardless of order
        let mut tied = store_of(&[
            ("p", &[("v", FieldValue::Real(3.0))]),
            ("q", &[("v", FieldValue::Int(3))]),
        ]);
        for view in [view_of(&["p", "q"]), view_of(&["q", "p"])] {
            let out = execute_block(&mut tied, &registry_block("min"), &view, &args);
            assert_eq!(out.payload, Payload::Int(3));
        }
        let out =
            execute_block(&mut store, &registry_block("avg"), &view_of(&["a", "b"]), &args);
        assert_eq!(out.payload, Payload::SumCount { sum: 5.5, count: 2 });
        let out = execute_block(&mut store, &registry_block("avg"), &view_of(&[]), &args);
        assert_eq!(out.payload, Payload::SumCount { sum: 0.0, count: 0 });
    }

    #[test]
    fn scale_multiplies_in_place_and_reports_updates() {
        let mut store = store_of(&[
            ("a", &[("v", FieldValue::Int(28))]),
            ("b", &[("v", FieldValue::Real(2.0))]),
            ("c", &[("v", FieldValue::Text("x".into()))]),
        ]);
        let args = [Arg::Field("v".into()), Arg::Literal(FieldValue::Int(2))];
        let out = execute_block(
            &mut store,
            &registry_block("scale"),
            &view_of(&["a", "b", "c"]),
            &args,
        );
        assert_eq!(out.payload, Payload::Int(2));
        assert_eq!(out.skipped, 1);
        assert_eq!(store["a"].fields["v"], FieldValue::Int(56));
        assert_eq!(store["b"].fields["v"], FieldValue::Real(4.0));
        // keywords untouched
        assert!(store["a"].keywords().contains("t"));
    }

    #[test]
    fn payload_byte_model() {
        assert_eq!(Payload::Ids(vec!["r1".into(), "r10".into()]).byte_size(), 7);
        assert_eq!(Payload::Int(0).byte_size(), 8);
        assert_eq!(Payload::Real(1.5).byte_size(), 8);
        assert_eq!(Payload::SumCount { sum: 0.0, count: 0 }.byte_size(), 16);
        assert_eq!(Payload::Empty.byte_size(), 0);
    }

    #[test]
    fn payload_json_encoding() {
        let json = serde_json::to_string(&Payload::Int(2)).unwrap();
        assert_eq!(json, r#"{"kind":"int","value":2}"#);
        let json = serde_json::to_string(&Payload::Ids(vec!["r1".into()])).unwrap();
        assert_eq!(json, r#"{"kind":"ids","value":["r1"]}"#);
        let json = serde_json::to_string(&Payload::Empty).unwrap();
        assert_eq!(json, r#"{"kind":"empty"}"#);
        let json = serde_json::to_string(&Payload::SumCount { sum: 5.5, count: 2 }).unwrap();
        assert_eq!(json, r#"{"kind":"sumcount","value":{"sum":5.5,"count":2}}"#);
    }
}
