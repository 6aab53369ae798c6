//! The simulated network-on-chip: mesh adjacency, delivery disciplines that
//! bring one request to every DPU (or a chosen subset), return paths for
//! confirmations and results, and hop/byte accounting.
//!
//! Links are reliable and FIFO; every link traversal costs one tick and one
//! hop. The initiator hangs off the attachment DPU by a single external
//! link, so injection and ejection are link traversals too.

pub mod trace;

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use crate::dpu::{on_request_packet, Payload, ProtocolViolation, Registry};
use crate::fabric::{DpuId, Fabric, FabricError, Topology};
use crate::lang::Request;
use trace::{sort_events, Endpoint, EventKind, TraceEvent};

/// Fixed packet-framing sizes of the byte model. A request packet is
/// `REQUEST_HEADER_BYTES` plus the compiled request body; confirmations are
/// flat; a result packet is a header plus its payload bytes; counter
/// fragments carry just the two tallies.
pub const REQUEST_HEADER_BYTES: u64 = 16;
pub const CONFIRMATION_BYTES: u64 = 24;
pub const RESULT_HEADER_BYTES: u64 = 16;
pub const COUNTER_FRAGMENT_BYTES: u64 = 16;

/// The traveling request with its two tallies. Every DPU that sees it moves
/// exactly one of the counters.
#[derive(Debug, Clone, PartialEq)]
pub struct RequestPacket {
    pub request: Request,
    pub processing_count: u32,
    pub rejection_count: u32,
    pub hop_count: u64,
    pub visited: Vec<DpuId>,
}

impl RequestPacket {
    pub fn new(request: Request) -> Self {
        Self {
            request,
            processing_count: 0,
            rejection_count: 0,
            hop_count: 0,
            visited: Vec::new(),
        }
    }

    pub fn wire_size(&self) -> u64 {
        REQUEST_HEADER_BYTES + self.request.body_size() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfirmationPacket {
    pub request_id: u64,
    pub dpu_id: DpuId,
    pub forecast_ticks: u64,
    pub matched_estimate: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultPacket {
    pub request_id: u64,
    pub dpu_id: DpuId,
    pub payload: Payload,
    pub payload_bytes: u64,
}

impl ResultPacket {
    pub fn wire_size(&self) -> u64 {
        RESULT_HEADER_BYTES + self.payload_bytes
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoutingPolicy {
    SerpentineWalk,
    FloodSpanningTree,
    RelationMulticast,
}

impl fmt::Display for RoutingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RoutingPolicy::SerpentineWalk => "walk",
            RoutingPolicy::FloodSpanningTree => "flood",
            RoutingPolicy::RelationMulticast => "multicast",
        };
        write!(f, "{name}")
    }
}

impl FromStr for RoutingPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "walk" => Ok(RoutingPolicy::SerpentineWalk),
            "flood" => Ok(RoutingPolicy::FloodSpanningTree),
            "multicast" => Ok(RoutingPolicy::RelationMulticast),
            other => Err(format!(
                "unknown routing policy {other:?} (expected walk, flood, or multicast)"
            )),
        }
    }
}

/// Mesh neighbors at Manhattan distance 1, sorted, no wraparound.
pub fn neighbors(topology: &Topology, dpu: &DpuId) -> Result<Vec<DpuId>, FabricError> {
    if !topology.contains(dpu) {
        return Err(FabricError::UnknownDpu(dpu.clone()));
    }
    let mut out = Vec::new();
    for dim in 0..topology.dims() {
        let coord = dpu.coords()[dim];
        if coord > 0 {
            let mut c = dpu.coords().to_vec();
            c[dim] = coord - 1;
            out.push(DpuId::new(c));
        }
        if coord + 1 < topology.extents()[dim] {
            let mut c = dpu.coords().to_vec();
            c[dim] = coord + 1;
            out.push(DpuId::new(c));
        }
    }
    out.sort();
    Ok(out)
}

fn serpentine(extents: &[usize]) -> Vec<Vec<usize>> {
    if extents.len() == 1 {
        return (0..extents[0]).map(|i| vec![i]).collect();
    }
    let inner = serpentine(&extents[1..]);
    let mut out = Vec::with_capacity(extents.iter().product());
    for i in 0..extents[0] {
        let plane: Box<dyn Iterator<Item = &Vec<usize>>> = if i % 2 == 0 {
            Box::new(inner.iter())
        } else {
            Box::new(inner.iter().rev())
        };
        for tail in plane {
            let mut coords = Vec::with_capacity(extents.len());
            coords.push(i);
            coords.extend_from_slice(tail);
            out.push(coords);
        }
    }
    out
}

/// Boustrophedon order starting at the all-zeros DPU: every consecutive
/// pair is a mesh link, every DPU appears exactly once. In 3D the planes
/// nest with alternating orientation so plane seams stay adjacent.
pub fn plan_walk(topology: &Topology) -> Vec<DpuId> {
    serpentine(topology.extents())
        .into_iter()
        .map(DpuId::new)
        .collect()
}

/// Breadth-first broadcast tree (child → parent), children explored in
/// sorted coordinate order.
pub fn spanning_tree(topology: &Topology, root: &DpuId) -> BTreeMap<DpuId, DpuId> {
    let mut parents = BTreeMap::new();
    let mut seen = BTreeSet::from([root.clone()]);
    let mut queue = VecDeque::from([root.clone()]);
    while let Some(node) = queue.pop_front() {
        for peer in neighbors(topology, &node).expect("tree stays in topology") {
            if seen.insert(peer.clone()) {
                parents.insert(peer.clone(), node.clone());
                queue.push_back(peer);
            }
        }
    }
    parents
}

/// Dimension-ordered shortest path, first coordinate first. Includes both
/// endpoints; the identity path is empty.
pub fn route_back(topology: &Topology, from: &DpuId, to: &DpuId) -> Vec<DpuId> {
    debug_assert!(topology.contains(from) && topology.contains(to));
    if from == to {
        return Vec::new();
    }
    let mut path = vec![from.clone()];
    let mut cur = from.coords().to_vec();
    for dim in 0..topology.dims() {
        while cur[dim] != to.coords()[dim] {
            if cur[dim] < to.coords()[dim] {
                cur[dim] += 1;
            } else {
                cur[dim] -= 1;
            }
            path.push(DpuId::new(cur.clone()));
        }
    }
    path
}

/// Everything one delivery produces: the returned packet, per-DPU traffic,
/// and the tick-stamped trace.
#[derive(Debug, Clone)]
pub struct RoutingOutcome {
    pub packet: RequestPacket,
    pub confirmations: Vec<ConfirmationPacket>,
    pub results: Vec<ResultPacket>,
    pub events: Vec<TraceEvent>,
    /// View records skipped across the fabric (missing/non-numeric fields).
    pub skipped: u64,
}

struct EventSink {
    events: Vec<TraceEvent>,
    request_id: u64,
}

impl EventSink {
    fn push(&mut self, tick: u64, kind: EventKind, from: Endpoint, to: Endpoint, bytes: u64) {
        self.events.push(TraceEvent { tick, kind, from, to, request: self.request_id, bytes });
    }

    /// Sends one packet from a DPU to the initiator along the dimension-
    /// ordered path plus the external link. The first link is crossed on
    /// `depart_tick + 1`; returns the arrival tick at the initiator.
    fn emit_return(
        &mut self,
        topology: &Topology,
        attachment: &DpuId,
        kind: EventKind,
        from: &DpuId,
        depart_tick: u64,
        bytes: u64,
    ) -> u64 {
        let mut t = depart_tick;
        let path = route_back(topology, from, attachment);
        for link in path.windows(2) {
            t += 1;
            self.push(t, kind, Endpoint::dpu(&link[0]), Endpoint::dpu(&link[1]), bytes);
        }
        t += 1;
        self.push(t, kind, Endpoint::dpu(attachment), Endpoint::Initiator, bytes);
        t
    }
}

struct Delivery<'a> {
    fabric: &'a mut Fabric,
    registry: &'a Registry,
    packet: RequestPacket,
    sink: EventSink,
    confirmations: Vec<ConfirmationPacket>,
    results: Vec<ResultPacket>,
    skipped: u64,
}

impl<'a> Delivery<'a> {
    fn new(fabric: &'a mut Fabric, registry: &'a Registry, request: &Request) -> Self {
        Self {
            fabric,
            registry,
            packet: RequestPacket::new(request.clone()),
            sink: EventSink { events: Vec::new(), request_id: request.request_id },
            confirmations: Vec::new(),
            results: Vec::new(),
            skipped: 0,
        }
    }

    /// Hands the packet to one DPU at `arrival_tick` and schedules the
    /// confirmation and result it may produce. Returns the decision tick.
    fn process_at(&mut self, id: &DpuId, arrival_tick: u64) -> Result<u64, ProtocolViolation> {
        let bytes = self.packet.wire_size();
        self.sink
            .push(arrival_tick, EventKind::Deliver, Endpoint::dpu(id), Endpoint::dpu(id), bytes);
        let topology = self.fabric.topology().clone();
        let attachment = self.fabric.initiator_attachment().clone();
        let dpu = self.fabric.dpu_mut(id).expect("delivery stays in topology");
        let work = on_request_packet(dpu, &mut self.packet, self.registry)?;
        let decision_tick = arrival_tick + 1;
        if let Some(work) = work {
            self.sink.emit_return(
                &topology,
                &attachment,
                EventKind::Confirm,
                id,
                decision_tick,
                CONFIRMATION_BYTES,
            );
            let result = ResultPacket {
                request_id: self.packet.request.request_id,
                dpu_id: id.clone(),
                payload_bytes: work.partial.payload.byte_size(),
                payload: work.partial.payload,
            };
            // one tick per view record, then one tick to package the report
            let depart = decision_tick + work.view_len as u64 + 1;
            self.sink.emit_return(
                &topology,
                &attachment,
                EventKind::Result,
                id,
                depart,
                result.wire_size(),
            );
            self.confirmations.push(work.confirmation);
            self.results.push(result);
            self.skipped += work.skipped;
        }
        Ok(decision_tick)
    }

    fn finish(mut self) -> RoutingOutcome {
        sort_events(&mut self.sink.events);
        RoutingOutcome {
            packet: self.packet,
            confirmations: self.confirmations,
            results: self.results,
            events: self.sink.events,
            skipped: self.skipped,
        }
    }
}

/// Serpentine unicast walk: the packet snakes over every DPU, then returns
/// home over the shortest dimension-ordered path and ejects.
pub fn route_walk(
    fabric: &mut Fabric,
    request: &Request,
    registry: &Registry,
) -> Result<RoutingOutcome, ProtocolViolation> {
    let topology = fabric.topology().clone();
    let attachment = fabric.initiator_attachment().clone();
    let walk = plan_walk(&topology);
    let mut d = Delivery::new(fabric, registry, request);
    let bytes = d.packet.wire_size();

    d.sink.push(1, EventKind::Inject, Endpoint::Initiator, Endpoint::dpu(&walk[0]), bytes);
    d.packet.hop_count += 1;

    let mut arrival = 1u64;
    for (i, id) in walk.iter().enumerate() {
        let decision = d.process_at(id, arrival)?;
        if let Some(next) = walk.get(i + 1) {
            d.sink.push(decision + 1, EventKind::Hop, Endpoint::dpu(id), Endpoint::dpu(next), bytes);
            d.packet.hop_count += 1;
            arrival = decision + 1;
        } else {
            let mut t = decision;
            for link in route_back(&topology, id, &attachment).windows(2) {
                t += 1;
                d.sink.push(t, EventKind::Hop, Endpoint::dpu(&link[0]), Endpoint::dpu(&link[1]), bytes);
                d.packet.hop_count += 1;
            }
            d.sink.push(t + 1, EventKind::Eject, Endpoint::dpu(&attachment), Endpoint::Initiator, bytes);
            d.packet.hop_count += 1;
        }
    }
    debug_assert_eq!(
        (d.packet.processing_count + d.packet.rejection_count) as usize,
        topology.dpu_count()
    );
    Ok(d.finish())
}

/// Spanning-tree broadcast with convergecast: the request floods root→leaves
/// along the BFS tree; counter fragments merge leaves→root; the root ejects
/// the final packet.
pub fn route_flood(
    fabric: &mut Fabric,
    request: &Request,
    registry: &Registry,
) -> Result<RoutingOutcome, ProtocolViolation> {
    let topology = fabric.topology().clone();
    let attachment = fabric.initiator_attachment().clone();
    let parents = spanning_tree(&topology, &attachment);
    let mut children: BTreeMap<DpuId, Vec<DpuId>> = BTreeMap::new();
    for (child, parent) in &parents {
        children.entry(parent.clone()).or_default().push(child.clone());
    }

    // BFS order and arrival ticks: one tick per tree link.
    let mut order = vec![attachment.clone()];
    let mut arrival: BTreeMap<DpuId, u64> = BTreeMap::from([(attachment.clone(), 1)]);
    let mut cursor = 0;
    while cursor < order.len() {
        let node = order[cursor].clone();
        cursor += 1;
        for child in children.get(&node).cloned().unwrap_or_default() {
            arrival.insert(child.clone(), arrival[&node] + 1);
            order.push(child);
        }
    }

    let mut d = Delivery::new(fabric, registry, request);
    let bytes = d.packet.wire_size();
    d.sink.push(1, EventKind::Inject, Endpoint::Initiator, Endpoint::dpu(&attachment), bytes);
    d.packet.hop_count += 1;
    for node in &order {
        if let Some(parent) = parents.get(node) {
            d.sink.push(arrival[node], EventKind::Hop, Endpoint::dpu(parent), Endpoint::dpu(node), bytes);
            d.packet.hop_count += 1;
        }
    }

    let mut decision: BTreeMap<DpuId, u64> = BTreeMap::new();
    for node in &order {
        decision.insert(node.clone(), d.process_at(node, arrival[node])?);
    }

    // Convergecast: a node sends its merged counter fragment one tick after
    // it has both decided and heard from every child.
    let mut ready: BTreeMap<DpuId, u64> = BTreeMap::new();
    for node in order.iter().rev() {
        let mut t = decision[node];
        for child in children.get(node).cloned().unwrap_or_default() {
            let sent = ready[&child] + 1;
            d.sink.push(sent, EventKind::Hop, Endpoint::dpu(&child), Endpoint::dpu(node), COUNTER_FRAGMENT_BYTES);
            d.packet.hop_count += 1;
            t = t.max(sent);
        }
        ready.insert(node.clone(), t);
    }
    d.sink.push(
        ready[&attachment] + 1,
        EventKind::Eject,
        Endpoint::dpu(&attachment),
        Endpoint::Initiator,
        bytes,
    );
    d.packet.hop_count += 1;

    debug_assert_eq!(
        (d.packet.processing_count + d.packet.rejection_count) as usize,
        topology.dpu_count()
    );
    Ok(d.finish())
}

/// Visits exactly the chosen targets in coordinate order, relaying through
/// intermediate DPUs without delivering to them, then returns home. The
/// caller owns target selection and the zero-acceptance fallback.
pub fn route_multicast(
    fabric: &mut Fabric,
    request: &Request,
    registry: &Registry,
    targets: &BTreeSet<DpuId>,
) -> Result<RoutingOutcome, ProtocolViolation> {
    assert!(!targets.is_empty(), "multicast needs at least one target");
    let topology = fabric.topology().clone();
    let attachment = fabric.initiator_attachment().clone();
    let mut d = Delivery::new(fabric, registry, request);
    let bytes = d.packet.wire_size();

    d.sink.push(1, EventKind::Inject, Endpoint::Initiator, Endpoint::dpu(&attachment), bytes);
    d.packet.hop_count += 1;
    let mut t = 1u64;
    let mut cur = attachment.clone();
    for target in targets {
        for link in route_back(&topology, &cur, target).windows(2) {
            t += 1;
            d.sink.push(t, EventKind::Hop, Endpoint::dpu(&link[0]), Endpoint::dpu(&link[1]), bytes);
            d.packet.hop_count += 1;
        }
        t = d.process_at(target, t)?;
        cur = target.clone();
    }
    for link in route_back(&topology, &cur, &attachment).windows(2) {
        t += 1;
        d.sink.push(t, EventKind::Hop, Endpoint::dpu(&link[0]), Endpoint::dpu(&link[1]), bytes);
        d.packet.hop_count += 1;
    }
    d.sink.push(t + 1, EventKind::Eject, Endpoint::dpu(&attachment), Endpoint::Initiator, bytes);
    d.packet.hop_count += 1;

    debug_assert_eq!(
        (d.packet.processing_count + d.packet.rejection_count) as usize,
        targets.len()
    );
    Ok(d.finish())
}

/// Delivers one request under a policy. Relation multicast needs a learned
/// target set, which lives in the orchestrator session; called without one
/// it degenerates to the broadcast it would fall back to anyway.
pub fn route_request(
    fabric: &mut Fabric,
    request: &Request,
    registry: &Registry,
    policy: RoutingPolicy,
) -> Result<RoutingOutcome, ProtocolViolation> {
    match policy {
        RoutingPolicy::SerpentineWalk => route_walk(fabric, request, registry),
        RoutingPolicy::FloodSpanningTree | RoutingPolicy::RelationMulticast => {
            route_flood(fabric, request, registry)
        }
    }
}
