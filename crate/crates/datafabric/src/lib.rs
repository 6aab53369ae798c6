//! A deterministic simulator of a data fabric: a mesh of data processing
//! units (DPUs) that each own a shard of keyword-indexed records and a
//! knowledge index over them. The initiator broadcasts self-contained
//! requests; every DPU independently accepts or rejects by digest, runs
//! the named functional block over its own store, and sends back a partial
//! result. The orchestrator merges partials and prices the data movement
//! against a CPU-centric rival that pulls every record to one core.
//!
//! The crate is organized along the request's path:
//!
//! - [`fabric`]: topology, records, keyword extraction, placement.
//! - [`lang`]: the `MATCH … WHERE … APPLY …;` request language.
//! - [`dpu`]: per-DPU state machine, functional blocks, digest gossip.
//! - [`noc`]: delivery disciplines, return routing, the event trace.
//! - [`orchestrator`]: result merging, the centralized baseline, metrics.
//! - [`cli`]: the `run` / `evolve` / `check` binary front end.
//!
//! Everything is deterministic: same dataset, topology, policies, and seed
//! give byte-identical traces and reports. Start with the `examples/`
//! directory; each one exercises a single capability end to end.

pub mod cli;
pub mod dpu;
pub mod fabric;
pub mod lang;
pub mod noc;
pub mod orchestrator;

pub use dpu::{DpuState, Evolution, FsmState, Payload, Registry};
pub use fabric::{
    build_fabric, load_dataset, place_records, DpuId, ExtractionPolicy, Fabric, FabricError,
    PlacementPolicy, Record, Topology,
};
pub use lang::{parse_program, parse_request, Compiler, LangError, Request};
pub use noc::{route_request, RoutingPolicy};
pub use orchestrator::{
    compare, run_centralized, run_request, run_script, FinalResult, Metrics, RunOutcome, Session,
};
