//! The DPU automaton: keyword-relevance decision, view preparation, block
//! execution, and forecasting. Each DPU acts on its own digest and store
//! only; everything it learns about the rest of the fabric arrives as
//! packets or gossip.

pub mod blocks;
pub mod evolution;

use std::collections::{BTreeMap, BTreeSet};

use crate::fabric::{DpuId, KnowledgeIndex, Record};
use crate::lang::{conditions_hold, MatchMode, Request};
use crate::noc::{ConfirmationPacket, RequestPacket};

pub use blocks::{
    execute_block, extreme_replaces, ArgKind, BlockKind, BlockOutcome, FunctionalBlock,
    PartialResult, Payload, Registry,
};
pub use evolution::{jaccard, relation_oracle, Evolution, RelationEdge, RelationGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsmState {
    Idle,
    Matching,
    PreparingView,
    Executing,
    Reporting,
}

impl FsmState {
    /// The automaton's legal moves: Idle→Matching→{Idle | PreparingView→
    /// Executing→Reporting→Idle}.
    pub fn can_advance_to(self, to: FsmState) -> bool {
        use FsmState::*;
        matches!(
            (self, to),
            (Idle, Matching)
                | (Matching, Idle)
                | (Matching, PreparingView)
                | (PreparingView, Executing)
                | (Executing, Reporting)
                | (Reporting, Idle)
        )
    }
}

/// One audit-log entry; every state change a DPU ever makes lands here.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FsmTransition {
    pub request_id: u64,
    pub from: FsmState,
    pub to: FsmState,
}

#[derive(Debug, Clone)]
pub struct DpuState {
    pub id: DpuId,
    pub store: BTreeMap<String, Record>,
    pub index: KnowledgeIndex,
    pub fsm: FsmState,
    /// Relation edges this DPU has formed: peer id → Jaccard weight.
    pub relations: BTreeMap<DpuId, f64>,
    /// Peer digests learned through gossip.
    pub gossip: BTreeMap<DpuId, BTreeSet<String>>,
    pub fsm_log: Vec<FsmTransition>,
}

impl DpuState {
    pub fn new(id: DpuId) -> Self {
        Self {
            id,
            store: BTreeMap::new(),
            index: KnowledgeIndex::new(),
            fsm: FsmState::Idle,
            relations: BTreeMap::new(),
            gossip: BTreeMap::new(),
            fsm_log: Vec::new(),
        }
    }

    fn advance(&mut self, request_id: u64, to: FsmState) {
        assert!(
            self.fsm.can_advance_to(to),
            "DPU {} illegal FSM transition {:?} -> {to:?}",
            self.id,
            self.fsm
        );
        self.fsm_log.push(FsmTransition { request_id, from: self.fsm, to });
        self.fsm = to;
    }

    pub fn decide(&self, request: &Request) -> Decision {
        decide(&self.index, request)
    }

    /// Local record ids passing the keyword match, before conditions.
    pub fn candidates(&self, request: &Request) -> BTreeSet<String> {
        candidates(&self.index, request)
    }

    pub fn prepare_view(&self, request: &Request) -> View {
        let cands = self.candidates(request);
        let candidate_count = cands.len();
        let ids = cands
            .into_iter()
            .filter(|id| conditions_hold(&self.store[id].fields, &request.conditions))
            .collect::<Vec<_>>();
        View { ids, candidate_count }
    }

    /// Ticks this DPU promises the initiator: one per candidate record plus
    /// two fixed (decide, report).
    pub fn forecast(&self, request: &Request) -> u64 {
        self.candidates(request).len() as u64 + 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionReason {
    KeywordMatch,
    NoRelevantKeyword,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub accept: bool,
    pub reason: DecisionReason,
}

/// The accept/reject test. Reads nothing but the DPU's own knowledge index:
/// ANY accepts on any digest overlap, ALL requires the whole request keyword
/// set in the digest. Conditions are not consulted here.
pub fn decide(index: &KnowledgeIndex, request: &Request) -> Decision {
    let digest = index.digest();
    let accept = match request.mode {
        MatchMode::Any => request.keywords.iter().any(|k| digest.contains(k)),
        MatchMode::All => request.keywords.iter().all(|k| digest.contains(k)),
    };
    Decision {
        accept,
        reason: if accept {
            DecisionReason::KeywordMatch
        } else {
            DecisionReason::NoRelevantKeyword
        },
    }
}

fn candidates(index: &KnowledgeIndex, request: &Request) -> BTreeSet<String> {
    let mut iter = request.keywords.iter();
    match request.mode {
        MatchMode::Any => {
            let mut out = BTreeSet::new();
            for k in iter {
                if let Some(ids) = index.records_for(k) {
                    out.extend(ids.iter().cloned());
                }
            }
            out
        }
        MatchMode::All => {
            let first = match iter.next().and_then(|k| index.records_for(k)) {
                Some(ids) => ids.clone(),
                None => return BTreeSet::new(),
            };
            iter.fold(first, |acc, k| match index.records_for(k) {
                Some(ids) => acc.intersection(ids).cloned().collect(),
                None => BTreeSet::new(),
            })
        }
    }
}

/// The record subset one DPU will execute over, in id order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct View {
    pub ids: Vec<String>,
    pub candidate_count: usize,
}

/// Everything an accepting DPU produces for one request.
#[derive(Debug, Clone, PartialEq)]
pub struct DpuWork {
    pub confirmation: ConfirmationPacket,
    pub partial: PartialResult,
    pub view_len: usize,
    pub skipped: u64,
    /// Decide + one tick per view record + report.
    pub busy_ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("protocol violation: request {request_id} delivered twice to DPU {dpu}")]
pub struct ProtocolViolation {
    pub request_id: u64,
    pub dpu: DpuId,
}

/// One DPU consuming the request packet: exactly one counter moves, the
/// visited list grows by this DPU, and acceptance runs the full local
/// pipeline (view, block, report) before the automaton returns to idle.
pub fn on_request_packet(
    dpu: &mut DpuState,
    packet: &mut RequestPacket,
    registry: &Registry,
) -> Result<Option<DpuWork>, ProtocolViolation> {
    let request_id = packet.request.request_id;
    if packet.visited.contains(&dpu.id) {
        return Err(ProtocolViolation { request_id, dpu: dpu.id.clone() });
    }
    packet.visited.push(dpu.id.clone());

    dpu.advance(request_id, FsmState::Matching);
    let decision = dpu.decide(&packet.request);
    if !decision.accept {
        packet.rejection_count += 1;
        dpu.advance(request_id, FsmState::Idle);
        return Ok(None);
    }
    packet.processing_count += 1;

    let candidate_count = dpu.candidates(&packet.request).len() as u64;
    let confirmation = ConfirmationPacket {
        request_id,
        dpu_id: dpu.id.clone(),
        forecast_ticks: candidate_count + 2,
        matched_estimate: candidate_count,
    };

    dpu.advance(request_id, FsmState::PreparingView);
    let view = dpu.prepare_view(&packet.request);

    dpu.advance(request_id, FsmState::Executing);
    let block = registry.select_block(&packet.request);
    let outcome = execute_block(&mut dpu.store, block, &view, &packet.request.args);

    dpu.advance(request_id, FsmState::Reporting);
    let partial = PartialResult {
        request_id,
        dpu: dpu.id.clone(),
        payload: outcome.payload,
    };
    dpu.advance(request_id, FsmState::Idle);

    let view_len = view.ids.len();
    Ok(Some(DpuWork {
        confirmation,
        partial,
        view_len,
        skipped: outcome.skipped,
        busy_ticks: view_len as u64 + 2,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::topology::dpu2;
    use crate::fabric::{
        build_fabric, load_dataset, place_records, ExtractionPolicy, PlacementPolicy, Topology,
    };
    use crate::fabric::Fabric;
    use crate::lang::{parse_request, Compiler};

    const D1: &str = include_str!("../../fixtures/d1.jsonl");

    fn d1_fabric(extraction: ExtractionPolicy) -> Fabric {
        let mut fabric = build_fabric(Topology::grid_2d(2, 2).unwrap(), 7).unwrap();
        let records = load_dataset(D1.as_bytes(), extraction).unwrap();
        place_records(&mut fabric, &records, PlacementPolicy::RoundRobin).unwrap();
        fabric
    }

    fn compile(text: &str) -> Request {
        let ast = parse_request(text).unwrap();
        Compiler::new(Registry::standard()).compile(&ast).unwrap()
    }

    #[test]
    fn decide_matches_digest_semantics() {
        let fabric = d1_fabric(ExtractionPolicy::TagsPlusTextTokens);
        // (0,1) holds r2 {sensor,temp,pune} and r6 {sensor,temp,kyiv}
        let dpu = fabric.dpu(&dpu2(0, 1)).unwrap();
        assert!(dpu.decide(&compile("MATCH ANY(temp) APPLY count;")).accept);
        assert!(!dpu.decide(&compile("MATCH ANY(unicorn) APPLY count;")).accept);
        assert_eq!(
            dpu.decide(&compile("MATCH ANY(unicorn) APPLY count;")).reason,
            DecisionReason::NoRelevantKeyword
        );
        // ALL: {sensor,humidity} is not a subset of (0,1)'s digest
        assert!(!dpu.decide(&compile("MATCH ALL(sensor, humidity) APPLY count;")).accept);
        assert!(dpu.decide(&compile("MATCH ALL(sensor, temp) APPLY count;")).accept);
    }

    #[test]
    fn all_mode_candidates_are_the_keyword_intersection() {
        let fabric = d1_fabric(ExtractionPolicy::ExplicitTags);
        // (0,0) holds r1 {sensor,temp} and r5 {log,info}: digest covers
        // {sensor,info} jointly but no single record holds both.
        let dpu = fabric.dpu(&dpu2(0, 0)).unwrap();
        let req = compile("MATCH ALL(sensor, info) APPLY count;");
        assert!(dpu.decide(&req).accept);
        assert!(dpu.candidates(&req).is_empty());
        assert_eq!(dpu.prepare_view(&req).ids, Vec::<String>::new());
        assert_eq!(dpu.forecast(&req), 2);
    }

    #[test]
    fn views_filter_conditions_after_the_keyword_match() {
        let fabric = d1_fabric(ExtractionPolicy::ExplicitTags);
        let req = compile("MATCH ANY(temp) WHERE value > 29 APPLY count;");
        let at01 = fabric.dpu(&dpu2(0, 1)).unwrap().prepare_view(&req);
        assert_eq!(at01.ids, vec!["r2".to_string()]);
        assert_eq!(at01.candidate_count, 2);
        let at00 = fabric.dpu(&dpu2(0, 0)).unwrap().prepare_view(&req);
        assert_eq!(at00.ids, vec!["r1".to_string()]);
        // conditions on a field these records lack -> empty view, candidates intact
        let absent = compile("MATCH ANY(temp) WHERE code == 200 APPLY count;");
        let view = fabric.dpu(&dpu2(0, 1)).unwrap().prepare_view(&absent);
        assert!(view.ids.is_empty());
        assert_eq!(view.candidate_count, 2);
    }

    #[test]
    fn forecast_bounds_actual_busy_ticks() {
        let mut fabric = d1_fabric(ExtractionPolicy::ExplicitTags);
        let req = compile("MATCH ANY(temp) WHERE value > 29 APPLY count;");
        let registry = Registry::standard();
        let mut packet = RequestPacket::new(req.clone());
        let dpu = fabric.dpu_mut(&dpu2(0, 1)).unwrap();
        let forecast = dpu.forecast(&req);
        let work = on_request_packet(dpu, &mut packet, &registry).unwrap().unwrap();
        assert_eq!(work.confirmation.forecast_ticks, forecast);
        assert_eq!(forecast, 4);
        assert_eq!(work.busy_ticks, 3);
        assert!(work.busy_ticks <= forecast);
    }

    #[test]
    fn packet_counters_move_exactly_once_per_dpu() {
        let mut fabric = d1_fabric(ExtractionPolicy::ExplicitTags);
        let req = compile("MATCH ANY(temp) APPLY count;");
        let registry = Registry::standard();
        let mut packet = RequestPacket::new(req);
        for id in [dpu2(0, 0), dpu2(0, 1), dpu2(1, 0), dpu2(1, 1)] {
            let dpu = fabric.dpu_mut(&id).unwrap();
            on_request_packet(dpu, &mut packet, &registry).unwrap();
        }
        assert_eq!((packet.processing_count, packet.rejection_count), (2, 2));
        assert_eq!(packet.visited.len(), 4);
        // double delivery is a protocol violation
        let dpu = fabric.dpu_mut(&dpu2(0, 0)).unwrap();
        let err = on_request_packet(dpu, &mut packet, &registry).unwrap_err();
        assert_eq!(err.dpu, dpu2(0, 0));
    }

    #[test]
    fn fsm_log_walks_the_legal_graph_only() {
        let mut fabric = d1_fabric(ExtractionPolicy::ExplicitTags);
        let registry = Registry::standard();
        let accept = compile("MATCH ANY(temp) APPLY count;");
        let reject = compile("MATCH ANY(unicorn) APPLY count;");
        for req in [accept, reject] {
            let mut packet = RequestPacket::new(req);
            let dpu = fabric.dpu_mut(&dpu2(0, 0)).unwrap();
            on_request_packet(dpu, &mut packet, &registry).unwrap();
        }
        let dpu = fabric.dpu(&dpu2(0, 0)).unwrap();
        assert_eq!(dpu.fsm, FsmState::Idle);
        let mut state = FsmState::Idle;
        let mut executed_for: BTreeSet<u64> = BTreeSet::new();
        for t in &dpu.fsm_log {
            assert_eq!(t.from, state);
            assert!(t.from.can_advance_to(t.to), "illegal {t:?}");
            if t.to == FsmState::Executing {
                executed_for.insert(t.request_id);
            }
            state = t.to;
        }
        // the accepting request reached Executing (five transitions around
        // the full loop), the rejecting one bounced straight back (two)
        assert_eq!(executed_for.len(), 1);
        assert_eq!(dpu.fsm_log.len(), 5 + 2);
    }

    #[test]
    fn scale_leaves_digests_unchanged() {
        let mut fabric = d1_fabric(ExtractionPolicy::ExplicitTags);
        let registry = Registry::standard();
        let before = fabric.knowledge_digest(&dpu2(0, 1)).unwrap();
        let req = compile("MATCH ANY(temp) WHERE value < 30 APPLY scale(value, 2);");
        let mut packet = RequestPacket::new(req);
        let dpu = fabric.dpu_mut(&dpu2(0, 1)).unwrap();
        let work = on_request_packet(dpu, &mut packet, &registry).unwrap().unwrap();
        assert_eq!(work.partial.payload, Payload::Int(1));
        assert_eq!(fabric.knowledge_digest(&dpu2(0, 1)).unwrap(), before);
        let dpu = fabric.dpu(&dpu2(0, 1)).unwrap();
        assert_eq!(
            dpu.store["r6"].fields["value"],
            crate::fabric::FieldValue::Int(56)
        );
    }
}
