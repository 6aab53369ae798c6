//! The initiator side of the protocol: drives a delivery, merges partial
//! results into one answer, runs the pull-everything baseline on the same
//! fabric, and turns traces into movement metrics.

pub mod report;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

use crate::dpu::{
    decide, extreme_replaces, BlockKind, Payload, ProtocolViolation, Registry,
};
use crate::fabric::{DpuId, Fabric, FieldValue, Record};
use crate::lang::{
    conditions_hold, parse_program, Arg, Compiler, LangError, MatchMode, Request,
};
use crate::noc::trace::{Endpoint, TraceEvent};
use crate::noc::{
    route_flood, route_multicast, route_request, route_walk, RoutingOutcome, RoutingPolicy,
};

#[derive(Debug, Clone, Error)]
pub enum RunError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Protocol(#[from] ProtocolViolation),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RequestStatus {
    Ok,
    NoRelevantData,
}

/// What the initiator hands back once a request's packets are home.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalResult {
    pub request_id: u64,
    pub status: RequestStatus,
    pub payload: Payload,
    pub processing: u32,
    pub rejection: u32,
    pub confirmations: u32,
}

/// Data-movement tallies for one request. `byte_hops` is the energy proxy:
/// every byte pays once per link it crosses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub payload_bytes: u64,
    pub byte_hops: u64,
    pub hops: u64,
    pub packets: u64,
    pub completion_tick: u64,
}

/// Per-field fabric/baseline quotients; `None` where the baseline is zero
/// (empty dataset), rendered as null.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub payload_bytes: Option<f64>,
    pub byte_hops: Option<f64>,
    pub hops: Option<f64>,
    pub packets: Option<f64>,
    pub completion_tick: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub fabric: Metrics,
    pub baseline: Metrics,
    pub ratios: Ratios,
}

pub fn compare(fabric: Metrics, baseline: Metrics) -> Comparison {
    fn ratio(n: u64, d: u64) -> Option<f64> {
        (d != 0).then(|| n as f64 / d as f64)
    }
    Comparison {
        fabric,
        baseline,
        ratios: Ratios {
            payload_bytes: ratio(fabric.payload_bytes, baseline.payload_bytes),
            byte_hops: ratio(fabric.byte_hops, baseline.byte_hops),
            hops: ratio(fabric.hops, baseline.hops),
            packets: ratio(fabric.packets, baseline.packets),
            completion_tick: ratio(fabric.completion_tick, baseline.completion_tick),
        },
    }
}

/// Folds a trace into metrics. Payload bytes are whatever crosses the
/// external link toward the initiator; hops and byte-hops count every link
/// event; delivery within a DPU is free.
pub fn metrics_from_events(events: &[TraceEvent], packets: u64) -> Metrics {
    let mut metrics = Metrics { packets, ..Metrics::default() };
    for event in events {
        if event.kind.is_link() {
            metrics.hops += 1;
            metrics.byte_hops += event.bytes;
        }
        if event.to == Endpoint::Initiator {
            metrics.payload_bytes += event.bytes;
        }
        metrics.completion_tick = metrics.completion_tick.max(event.tick);
    }
    metrics
}

fn payload_num(p: &Payload) -> Option<(f64, bool)> {
    match p {
        Payload::Int(i) => Some((*i as f64, true)),
        Payload::Real(r) => Some((*r, false)),
        _ => None,
    }
}

fn int_of(p: &Payload) -> i64 {
    match p {
        Payload::Int(i) => *i,
        _ => 0,
    }
}

/// Merges per-DPU partials into the request's answer. Empty input obeys the
/// same identities the DPUs use for empty views.
pub fn aggregate_payload(kind: BlockKind, partials: &[Payload]) -> Payload {
    match kind {
        BlockKind::Search => {
            let mut ids = BTreeSet::new();
            for p in partials {
                if let Payload::Ids(found) = p {
                    ids.extend(found.iter().cloned());
                }
            }
            Payload::Ids(ids.into_iter().collect())
        }
        BlockKind::Count | BlockKind::Scale => Payload::Int(partials.iter().map(int_of).sum()),
        BlockKind::Sum => {
            if partials.iter().any(|p| matches!(p, Payload::Real(_))) {
                Payload::Real(partials.iter().filter_map(|p| payload_num(p).map(|n| n.0)).sum())
            } else {
                Payload::Int(partials.iter().map(int_of).sum())
            }
        }
        BlockKind::Min | BlockKind::Max => {
            let want_max = matches!(kind, BlockKind::Max);
            let mut best: Option<&Payload> = None;
            for p in partials {
                let Some(candidate) = payload_num(p) else { continue };
                let replace = match best {
                    None => true,
                    Some(b) => extreme_replaces(want_max, payload_num(b).unwrap(), candidate),
                };
                if replace {
                    best = Some(p);
                }
            }
            best.cloned().unwrap_or(Payload::Empty)
        }
        BlockKind::Avg => {
            let (mut sum, mut count) = (0.0f64, 0u64);
            for p in partials {
                if let Payload::SumCount { sum: s, count: c } = p {
                    sum += s;
                    count += c;
                }
            }
            if count == 0 {
                Payload::Empty
            } else {
                Payload::Real(sum / count as f64)
            }
        }
    }
}

/// One request, fully settled: the merged answer, its movement metrics, the
/// trace, and how many view records blocks had to skip.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub result: FinalResult,
    pub metrics: Metrics,
    pub events: Vec<TraceEvent>,
    pub skipped: u64,
}

fn settle(registry: &Registry, request: &Request, phases: Vec<RoutingOutcome>) -> RunOutcome {
    let kind = registry.select_block(request).kind;
    let mut events = Vec::new();
    let mut partials = Vec::new();
    let mut packets = 0u64;
    let mut confirmations = 0u32;
    let mut skipped = 0u64;
    for phase in &phases {
        packets += 1 + phase.confirmations.len() as u64 + phase.results.len() as u64;
        confirmations += phase.confirmations.len() as u32;
        skipped += phase.skipped;
        partials.extend(phase.results.iter().map(|r| (r.dpu_id.clone(), r.payload.clone())));
        events.extend(phase.events.iter().cloned());
    }
    // Aggregate in DPU order, not arrival order, so the folded payload is
    // bit-identical across routing modes.
    partials.sort_by(|a, b| a.0.cmp(&b.0));
    let partials: Vec<Payload> = partials.into_iter().map(|(_, p)| p).collect();
    let last = phases.last().expect("at least one delivery phase");
    let result = FinalResult {
        request_id: request.request_id,
        status: if last.packet.processing_count == 0 {
            RequestStatus::NoRelevantData
        } else {
            RequestStatus::Ok
        },
        payload: aggregate_payload(kind, &partials),
        processing: last.packet.processing_count,
        rejection: last.packet.rejection_count,
        confirmations,
    };
    let metrics = metrics_from_events(&events, packets);
    RunOutcome { result, metrics, events, skipped }
}

/// Delivers one request without session state. Multicast degenerates to the
/// broadcast it would fall back to on a cold cache; use a [`Session`] to
/// get learned target sets.
pub fn run_request(
    fabric: &mut Fabric,
    request: &Request,
    registry: &Registry,
    policy: RoutingPolicy,
) -> Result<RunOutcome, ProtocolViolation> {
    let outcome = route_request(fabric, request, registry, policy)?;
    Ok(settle(registry, request, vec![outcome]))
}

fn record_matches(request: &Request, record: &Record) -> bool {
    match request.mode {
        MatchMode::Any => request.keywords.iter().any(|k| record.keywords().contains(k)),
        MatchMode::All => request.keywords.iter().all(|k| record.keywords().contains(k)),
    }
}

fn central_payload(kind: BlockKind, request: &Request, matched: &[&Record]) -> Payload {
    let field = request.args.first().and_then(|a| match a {
        Arg::Field(name) => Some(name.as_str()),
        Arg::Literal(_) => None,
    });
    let numeric: Vec<&FieldValue> = match field {
        Some(f) => matched
            .iter()
            .filter_map(|r| r.fields.get(f))
            .filter(|v| v.is_numeric())
            .collect(),
        None => Vec::new(),
    };
    match kind {
        BlockKind::Search => Payload::Ids(matched.iter().map(|r| r.id.clone()).collect()),
        BlockKind::Count => Payload::Int(matched.len() as i64),
        BlockKind::Sum => {
            if numeric.iter().any(|v| matches!(v, FieldValue::Real(_))) {
                Payload::Real(numeric.iter().filter_map(|v| v.as_f64()).sum())
            } else {
                Payload::Int(
                    numeric
                        .iter()
                        .map(|v| match v {
                            FieldValue::Int(i) => *i,
                            _ => 0,
                        })
                        .sum(),
                )
            }
        }
        BlockKind::Min | BlockKind::Max => {
            let want_max = matches!(kind, BlockKind::Max);
            let mut best: Option<&FieldValue> = None;
            for v in &numeric {
                let candidate = (v.as_f64().unwrap(), matches!(v, FieldValue::Int(_)));
                let replace = match best {
                    None => true,
                    Some(b) => extreme_replaces(
                        want_max,
                        (b.as_f64().unwrap(), matches!(b, FieldValue::Int(_))),
                        candidate,
                    ),
                };
                if replace {
                    best = Some(v);
                }
            }
            match best {
                Some(FieldValue::Int(i)) => Payload::Int(*i),
                Some(FieldValue::Real(r)) => Payload::Real(*r),
                _ => Payload::Empty,
            }
        }
        BlockKind::Avg => {
            if numeric.is_empty() {
                Payload::Empty
            } else {
                let sum: f64 = numeric.iter().filter_map(|v| v.as_f64()).sum();
                Payload::Real(sum / numeric.len() as f64)
            }
        }
        BlockKind::Scale => Payload::Int(numeric.len() as i64),
    }
}

/// The CPU-centric rival: a core at the initiator port pulls every record
/// over the mesh (one packet of the record's serialized size each, pull
/// requests travel free) and evaluates everything locally. Never mutates
/// the fabric, so run it before the in-fabric delivery of the same request.
pub fn run_centralized(
    fabric: &Fabric,
    request: &Request,
    registry: &Registry,
) -> (FinalResult, Metrics) {
    let attachment = fabric.initiator_attachment().clone();
    let mut metrics = Metrics::default();
    let mut processing = 0u32;
    let mut rejection = 0u32;
    for (id, dpu) in fabric.dpus() {
        if decide(&dpu.index, request).accept {
            processing += 1;
        } else {
            rejection += 1;
        }
        let links = id.manhattan_distance(&attachment) as u64 + 1;
        for record in dpu.store.values() {
            let bytes = record.serialized_size();
            metrics.hops += links;
            metrics.byte_hops += bytes * links;
            metrics.payload_bytes += bytes;
            metrics.packets += 1;
            metrics.completion_tick += links;
        }
    }
    // one tick per record of central evaluation
    metrics.completion_tick += fabric.record_count() as u64;

    let matched: Vec<&Record> = fabric
        .all_records()
        .into_iter()
        .map(|(_, record)| record)
        .filter(|r| record_matches(request, r) && conditions_hold(&r.fields, &request.conditions))
        .collect();
    let result = FinalResult {
        request_id: request.request_id,
        status: if processing == 0 {
            RequestStatus::NoRelevantData
        } else {
            RequestStatus::Ok
        },
        payload: central_payload(registry.select_block(request).kind, request, &matched),
        processing,
        rejection,
        confirmations: 0,
    };
    (result, metrics)
}

/// Initiator state that persists across requests: the block registry and
/// the keyword→confirmers cache that relation multicast feeds on.
///
/// The cache only learns from full-coverage runs of ANY-mode requests,
/// where the confirmer set provably covers every holder of every requested
/// keyword; since registration freezes keywords, entries never go stale in
/// the unsafe direction. ALL-mode confirmers can miss holders, so those
/// runs teach nothing.
pub struct Session {
    registry: Registry,
    cache: BTreeMap<String, BTreeSet<DpuId>>,
}

impl Default for Session {
    fn default() -> Self {
        Self::new()
    }
}

impl Session {
    pub fn new() -> Self {
        Self { registry: Registry::standard(), cache: BTreeMap::new() }
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn cached_confirmers(&self, keyword: &str) -> Option<&BTreeSet<DpuId>> {
        self.cache.get(keyword)
    }

    fn learn(&mut self, request: &Request, outcome: &RoutingOutcome) {
        if request.mode != MatchMode::Any {
            return;
        }
        let confirmers: Vec<DpuId> =
            outcome.confirmations.iter().map(|c| c.dpu_id.clone()).collect();
        for keyword in &request.keywords {
            self.cache
                .entry(keyword.clone())
                .or_default()
                .extend(confirmers.iter().cloned());
        }
    }

    /// Picks multicast targets from the cache, or `None` on a cold miss.
    /// ANY needs every keyword cached (union of entries); ALL needs at
    /// least one (intersection of the cached ones). Either way the set is
    /// widened with the targets' relation neighbors.
    pub fn multicast_targets(
        &self,
        fabric: &Fabric,
        request: &Request,
    ) -> Option<BTreeSet<DpuId>> {
        let mut targets: BTreeSet<DpuId> = BTreeSet::new();
        match request.mode {
            MatchMode::Any => {
                for keyword in &request.keywords {
                    targets.extend(self.cache.get(keyword)?.iter().cloned());
                }
            }
            MatchMode::All => {
                let cached: Vec<&BTreeSet<DpuId>> =
                    request.keywords.iter().filter_map(|k| self.cache.get(k)).collect();
                let (first, rest) = cached.split_first()?;
                targets = (*first).clone();
                for entry in rest {
                    targets = targets.intersection(entry).cloned().collect();
                }
            }
        }
        let mut widened = targets.clone();
        for id in &targets {
            if let Ok(dpu) = fabric.dpu(id) {
                widened.extend(dpu.relations.keys().cloned());
            }
        }
        Some(widened)
    }

    pub fn run(
        &mut self,
        fabric: &mut Fabric,
        request: &Request,
        policy: RoutingPolicy,
    ) -> Result<RunOutcome, ProtocolViolation> {
        match policy {
            RoutingPolicy::SerpentineWalk => {
                let outcome = route_walk(fabric, request, &self.registry)?;
                self.learn(request, &outcome);
                Ok(settle(&self.registry, request, vec![outcome]))
            }
            RoutingPolicy::FloodSpanningTree => {
                let outcome = route_flood(fabric, request, &self.registry)?;
                self.learn(request, &outcome);
                Ok(settle(&self.registry, request, vec![outcome]))
            }
            RoutingPolicy::RelationMulticast => self.run_multicast(fabric, request),
        }
    }

    fn run_multicast(
        &mut self,
        fabric: &mut Fabric,
        request: &Request,
    ) -> Result<RunOutcome, ProtocolViolation> {
        let targets = self.multicast_targets(fabric, request).unwrap_or_default();
        if targets.is_empty() {
            // cold cache, or a cache that proves nobody holds the keywords;
            // either way the broadcast is the answer and feeds the cache
            let outcome = route_flood(fabric, request, &self.registry)?;
            self.learn(request, &outcome);
            return Ok(settle(&self.registry, request, vec![outcome]));
        }
        let first = route_multicast(fabric, request, &self.registry, &targets)?;
        if first.packet.processing_count > 0 {
            return Ok(settle(&self.registry, request, vec![first]));
        }
        // every target rejected: re-broadcast so a stale or misleading cache
        // can never hide data, continuing the clock where phase one ended
        let offset = first.events.iter().map(|e| e.tick).max().unwrap_or(0);
        let mut second = route_flood(fabric, request, &self.registry)?;
        for event in &mut second.events {
            event.tick += offset;
        }
        self.learn(request, &second);
        Ok(settle(&self.registry, request, vec![first, second]))
    }
}

/// A whole script settled against one fabric: the per-request report
/// entries plus the concatenated trace. Each request runs its baseline
/// first (on the pre-request state), then the in-fabric delivery, so scale
/// mutations stay coherent between the two.
#[derive(Debug, Clone)]
pub struct ScriptRun {
    pub report: report::RunReport,
    pub events: Vec<TraceEvent>,
}

pub fn run_script(
    fabric: &mut Fabric,
    script: &str,
    policy: RoutingPolicy,
) -> Result<ScriptRun, RunError> {
    let asts = parse_program(script).map_err(LangError::from)?;
    let mut compiler = Compiler::new(Registry::standard());
    let mut session = Session::new();
    let mut entries = Vec::new();
    let mut events = Vec::new();
    for ast in &asts {
        let request = compiler.compile(ast).map_err(LangError::from)?;
        let (baseline_result, baseline_metrics) =
            run_centralized(fabric, &request, session.registry());
        let outcome = session.run(fabric, &request, policy)?;
        debug_assert_eq!(outcome.result.payload, baseline_result.payload);
        let comparison = compare(outcome.metrics, baseline_metrics);
        entries.push(report::RequestReport {
            request_id: request.request_id,
            source_text: ast.pretty(),
            status: outcome.result.status,
            payload: outcome.result.payload.clone(),
            counters: report::Counters {
                processing: outcome.result.processing,
                rejection: outcome.result.rejection,
            },
            fabric_metrics: outcome.metrics,
            baseline_metrics,
            ratios: comparison.ratios,
            skipped_values: outcome.skipped,
        });
        events.extend(outcome.events);
    }
    let report = report::RunReport {
        topology: fabric.topology().to_string(),
        routing: policy.to_string(),
        seed: fabric.seed(),
        records: fabric.record_count() as u64,
        requests: entries,
    };
    Ok(ScriptRun { report, events })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::topology::dpu2;
    use crate::fabric::{
        build_fabric, load_dataset, place_records, ExtractionPolicy, PlacementPolicy, Topology,
    };
    use crate::lang::parse_request;

    const D1: &str = include_str!("../../fixtures/d1.jsonl");

    fn d1_fabric() -> Fabric {
        let mut fabric = build_fabric(Topology::grid_2d(2, 2).unwrap(), 7).unwrap();
        let records = load_dataset(D1.as_bytes(), ExtractionPolicy::ExplicitTags).unwrap();
        place_records(&mut fabric, &records, PlacementPolicy::RoundRobin).unwrap();
        fabric
    }

    fn compiled(text: &str) -> Request {
        let ast = parse_request(text).unwrap();
        Compiler::new(Registry::standard()).compile(&ast).unwrap()
    }

    fn run_one(fabric: &mut Fabric, text: &str, policy: RoutingPolicy) -> RunOutcome {
        let registry = Registry::standard();
        run_request(fabric, &compiled(text), &registry, policy).unwrap()
    }

    #[test]
    fn count_request_end_to_end() {
        let mut fabric = d1_fabric();
        let out = run_one(
            &mut fabric,
            "MATCH ANY(temp) WHERE value > 29 APPLY count;",
            RoutingPolicy::SerpentineWalk,
        );
        assert_eq!(out.result.status, RequestStatus::Ok);
        assert_eq!(out.result.payload, Payload::Int(2));
        assert_eq!((out.result.processing, out.result.rejection), (2, 2));
        assert_eq!(out.result.confirmations, 2);
        assert_eq!(out.metrics.completion_tick, 10);
        assert_eq!(out.metrics.packets, 5);
        assert_eq!(out.metrics.hops, 12);
    }

    #[test]
    fn no_relevant_data_when_nothing_matches() {
        let mut fabric = d1_fabric();
        let out = run_one(
            &mut fabric,
            "MATCH ANY(unicorn) APPLY search;",
            RoutingPolicy::SerpentineWalk,
        );
        assert_eq!(out.result.status, RequestStatus::NoRelevantData);
        assert_eq!(out.result.payload, Payload::Ids(vec![]));
        assert_eq!((out.result.processing, out.result.rejection), (0, 4));
        assert_eq!(out.result.confirmations, 0);
    }

    #[test]
    fn search_merges_sorted_unique_ids() {
        let mut fabric = d1_fabric();
        let out = run_one(
            &mut fabric,
            "MATCH ANY(sensor) WHERE city == \"Oslo\" APPLY search;",
            RoutingPolicy::FloodSpanningTree,
        );
        assert_eq!(
            out.result.payload,
            Payload::Ids(vec!["r1".into(), "r3".into(), "r8".into()])
        );
    }

    #[test]
    fn scale_commits_and_requery_sees_it() {
        let mut fabric = d1_fabric();
        let out = run_one(
            &mut fabric,
            "MATCH ANY(temp) WHERE value < 30 APPLY scale(value, 2);",
            RoutingPolicy::SerpentineWalk,
        );
        assert_eq!(out.result.payload, Payload::Int(1));
        let out = run_one(
            &mut fabric,
            "MATCH ANY(temp) APPLY sum(value);",
            RoutingPolicy::SerpentineWalk,
        );
        assert_eq!(out.result.payload, Payload::Int(121));
    }

    #[test]
    fn baseline_agrees_and_moves_everything() {
        let registry = Registry::standard();
        for text in [
            "MATCH ANY(temp) WHERE value > 29 APPLY count;",
            "MATCH ANY(temp) APPLY sum(value);",
            "MATCH ANY(sensor) WHERE city == \"Oslo\" APPLY search;",
            "MATCH ALL(sensor, temp) APPLY avg(value);",
            "MATCH ANY(temp, pressure) APPLY min(value);",
            "MATCH ANY(unicorn) APPLY max(value);",
        ] {
            let mut fabric = d1_fabric();
            let request = compiled(text);
            let (base_result, base_metrics) = run_centralized(&fabric, &request, &registry);
            let out =
                run_request(&mut fabric, &request, &registry, RoutingPolicy::FloodSpanningTree)
                    .unwrap();
            assert_eq!(out.result.payload, base_result.payload, "{text}");
            assert_eq!(
                (out.result.processing, out.result.rejection),
                (base_result.processing, base_result.rejection),
                "{text}"
            );
            assert_eq!(base_metrics.payload_bytes, 309, "{text}");
        }
    }

    #[test]
    fn baseline_on_empty_fabric() {
        let fabric = build_fabric(Topology::grid_2d(2, 2).unwrap(), 7).unwrap();
        let registry = Registry::standard();
        let (result, metrics) = run_centralized(&fabric, &compiled("MATCH ANY(x) APPLY count;"), &registry);
        assert_eq!(result.status, RequestStatus::NoRelevantData);
        assert_eq!(result.payload, Payload::Int(0));
        assert_eq!(metrics, Metrics::default());
        let comparison = compare(Metrics::default(), metrics);
        assert_eq!(comparison.ratios.payload_bytes, None);
    }

    #[test]
    fn selective_count_moves_less_than_baseline() {
        let mut fabric = d1_fabric();
        let registry = Registry::standard();
        let request = compiled("MATCH ANY(temp) WHERE value > 29 APPLY count;");
        let (_, base) = run_centralized(&fabric, &request, &registry);
        let out =
            run_request(&mut fabric, &request, &registry, RoutingPolicy::SerpentineWalk).unwrap();
        assert!(out.metrics.payload_bytes < base.payload_bytes);
        let comparison = compare(out.metrics, base);
        assert!(comparison.ratios.payload_bytes.unwrap() < 1.0);
    }

    #[test]
    fn aggregate_payload_rules() {
        use Payload::*;
        assert_eq!(aggregate_payload(BlockKind::Count, &[Int(2), Int(0), Int(3)]), Int(5));
        assert_eq!(aggregate_payload(BlockKind::Sum, &[Int(2), Real(0.5)]), Real(2.5));
        assert_eq!(aggregate_payload(BlockKind::Sum, &[]), Int(0));
        assert_eq!(
            aggregate_payload(BlockKind::Min, &[Real(3.0), Int(3), Empty]),
            Int(3)
        );
        assert_eq!(aggregate_payload(BlockKind::Min, &[Empty, Empty]), Payload::Empty);
        assert_eq!(
            aggregate_payload(BlockKind::Max, &[Int(7), Real(7.5)]),
            Real(7.5)
        );
        assert_eq!(
            aggregate_payload(
                BlockKind::Avg,
                &[SumCount { sum: 5.0, count: 2 }, SumCount { sum: 4.0, count: 1 }]
            ),
            Real(3.0)
        );
        assert_eq!(
            aggregate_payload(BlockKind::Avg, &[SumCount { sum: 0.0, count: 0 }]),
            Payload::Empty
        );
        assert_eq!(
            aggregate_payload(BlockKind::Search, &[Ids(vec!["r2".into(), "r1".into()]), Ids(vec!["r1".into()])]),
            Ids(vec!["r1".into(), "r2".into()])
        );
    }

    #[test]
    fn session_learns_and_multicasts() {
        let mut fabric = d1_fabric();
        let mut session = Session::new();
        let warm = compiled("MATCH ANY(temp) APPLY count;");
        // cold cache: multicast degrades to a full broadcast and learns
        let out = session.run(&mut fabric, &warm, RoutingPolicy::RelationMulticast).unwrap();
        assert_eq!(out.result.payload, Payload::Int(3));
        assert_eq!(out.result.processing + out.result.rejection, 4);
        assert_eq!(
            session.cached_confirmers("temp"),
            Some(&BTreeSet::from([dpu2(0, 0), dpu2(0, 1)]))
        );
        // warm cache: only the confirmers get visited
        let again = compiled_with_id("MATCH ANY(temp) WHERE value > 29 APPLY count;", 2);
        let out = session.run(&mut fabric, &again, RoutingPolicy::RelationMulticast).unwrap();
        assert_eq!(out.result.payload, Payload::Int(2));
        assert_eq!(out.result.processing + out.result.rejection, 2);
    }

    #[test]
    fn multicast_fallback_proves_a_miss() {
        let mut fabric = d1_fabric();
        let mut session = Session::new();
        let warm = compiled("MATCH ANY(humidity) APPLY count;");
        let out = session.run(&mut fabric, &warm, RoutingPolicy::RelationMulticast).unwrap();
        assert_eq!(out.result.payload, Payload::Int(1));
        // the only cached confirmer lacks "error", so the multicast phase
        // rejects everywhere and the fallback flood proves the miss
        let probe = compiled_with_id("MATCH ALL(humidity, error) APPLY count;", 2);
        let out = session.run(&mut fabric, &probe, RoutingPolicy::RelationMulticast).unwrap();
        assert_eq!(out.result.payload, Payload::Int(0));
        assert_eq!((out.result.processing, out.result.rejection), (0, 4));
        assert_eq!(out.result.status, RequestStatus::NoRelevantData);
        assert_eq!(out.result.confirmations, 0);
        // phase two continues the clock where phase one stopped
        let ticks: Vec<u64> = out.events.iter().map(|e| e.tick).collect();
        assert!(ticks.windows(2).all(|w| w[0] <= w[1]));
    }

    fn compiled_with_id(text: &str, id: u64) -> Request {
        let mut request = compiled(text);
        request.request_id = id;
        request
    }

    #[test]
    fn script_run_produces_report_entries() {
        let mut fabric = d1_fabric();
        let script = "\
# two probes
MATCH ANY(temp) WHERE value > 29 APPLY count;
MATCH ANY(sensor) WHERE city == \"Oslo\" APPLY search;
";
        let run = run_script(&mut fabric, script, RoutingPolicy::SerpentineWalk).unwrap();
        assert_eq!(run.report.requests.len(), 2);
        let first = &run.report.requests[0];
        assert_eq!(first.request_id, 1);
        assert_eq!(first.source_text, "MATCH ANY(temp) WHERE value > 29 APPLY count;");
        assert_eq!(first.counters.processing, 2);
        assert_eq!(first.counters.rejection, 2);
        assert!(run.events.iter().any(|e| e.request == 2));
        let json = run.report.to_json();
        assert!(json.contains("\"payload_bytes\""));
        assert!(json.contains("\"skipped_values\""));
    }

    #[test]
    fn script_errors_carry_positions() {
        let mut fabric = d1_fabric();
        let err = run_script(&mut fabric, "MATCH ANY(temp APPLY count;", RoutingPolicy::SerpentineWalk)
            .unwrap_err();
        let RunError::Lang(LangError::Parse(parse)) = err else {
            panic!("expected a parse error")
        };
        assert_eq!((parse.line, parse.col), (1, 16));
    }
}
