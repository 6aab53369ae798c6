//! Link-event traces. One JSON object per line; byte-identical across runs
//! with the same inputs, which the determinism tests rely on.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::io::{self, Write};

use crate::fabric::DpuId;

/// Either side of a link event. The initiator sits outside the mesh, wired
/// to the attachment DPU by one external link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Initiator,
    Dpu(DpuId),
}

impl Endpoint {
    pub fn dpu(id: &DpuId) -> Self {
        Endpoint::Dpu(id.clone())
    }
}

impl PartialOrd for Endpoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Endpoint {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Endpoint::Initiator, Endpoint::Initiator) => Ordering::Equal,
            (Endpoint::Initiator, Endpoint::Dpu(_)) => Ordering::Less,
            (Endpoint::Dpu(_), Endpoint::Initiator) => Ordering::Greater,
            (Endpoint::Dpu(a), Endpoint::Dpu(b)) => a.cmp(b),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Endpoint::Initiator => serializer.serialize_str("initiator"),
            Endpoint::Dpu(id) => id.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Name(String),
            Coords(Vec<usize>),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Name(s) if s == "initiator" => Ok(Endpoint::Initiator),
            Raw::Name(s) => Err(D::Error::custom(format!("unknown endpoint {s:?}"))),
            Raw::Coords(c) => Ok(Endpoint::Dpu(DpuId::new(c))),
        }
    }
}

/// Packet kinds as they appear on links. `deliver` is the hand-off into a
/// DPU's automaton and crosses no link; everything else traverses one link
/// and counts one hop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Inject,
    Hop,
    Deliver,
    Confirm,
    Result,
    Eject,
}

impl EventKind {
    pub fn is_link(self) -> bool {
        self != EventKind::Deliver
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    pub kind: EventKind,
    pub from: Endpoint,
    pub to: Endpoint,
    pub request: u64,
    pub bytes: u64,
}

impl TraceEvent {
    /// The contractual total order: tick, then source, then kind, then
    /// target. Event generation already follows it; sorting is a no-op
    /// safety net that keeps the contract explicit.
    pub fn sort_key(&self) -> (u64, Endpoint, EventKind, Endpoint) {
        (self.tick, self.from.clone(), self.kind, self.to.clone())
    }
}

pub fn sort_events(events: &mut [TraceEvent]) {
    events.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Writes one event per line as JSON.
pub fn write_trace<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for event in events {
        serde_json::to_writer(&mut out, event)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
