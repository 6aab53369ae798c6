//! Relation multicast: a session remembers which DPUs confirmed which
//! keywords and, once warm, visits only those. A cold cache degrades to a
//! broadcast; a misleading cache is caught by the fallback re-broadcast,
//! so the answer is always the broadcast answer.

use std::error::Error;
use std::fs::File;
use std::io::BufReader;

use datafabric::noc::trace::{Endpoint, EventKind};
use datafabric::{
    build_fabric, load_dataset, place_records, Compiler, ExtractionPolicy, PlacementPolicy,
    Registry, Request, RoutingPolicy, RunOutcome, Session, Topology,
};

fn compile(text: &str, id: u64) -> Request {
    let ast = datafabric::parse_request(text).expect("request parses");
    let mut request =
        Compiler::new(Registry::standard()).compile(&ast).expect("request compiles");
    request.request_id = id;
    request
}

fn describe(label: &str, out: &RunOutcome) {
    let visited: Vec<String> = out
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Deliver)
        .map(|e| match &e.from {
            Endpoint::Dpu(id) => id.to_string(),
            Endpoint::Initiator => "initiator".to_string(),
        })
        .collect();
    println!("{label}");
    println!("    answer   {:?} ({:?})", out.result.payload, out.result.status);
    println!(
        "    visited  {} DPU(s): {}",
        visited.len(),
        visited.join(", ")
    );
    println!(
        "    cost     {} hops, {} byte-hops, done at tick {}",
        out.metrics.hops, out.metrics.byte_hops, out.metrics.completion_tick
    );
}

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/d1.jsonl");
    let records = load_dataset(
        BufReader::new(File::open(path)?),
        ExtractionPolicy::ExplicitTags,
    )?;
    let mut fabric = build_fabric(Topology::grid_2d(2, 2)?, 7)?;
    place_records(&mut fabric, &records, PlacementPolicy::RoundRobin)?;

    let mut session = Session::new();
    let multicast = RoutingPolicy::RelationMulticast;

    let out = session.run(&mut fabric, &compile("MATCH ANY(temp) APPLY count;", 1), multicast)?;
    describe("cold cache: multicast degrades to a full broadcast", &out);
    let learned: Vec<String> = session
        .cached_confirmers("temp")
        .expect("just learned")
        .iter()
        .map(|d| d.to_string())
        .collect();
    println!("    learned  temp -> {}\n", learned.join(", "));

    let out = session.run(
        &mut fabric,
        &compile("MATCH ANY(temp) WHERE value > 29 APPLY count;", 2),
        multicast,
    )?;
    describe("warm cache: only the remembered confirmers get visited", &out);
    println!();

    // warm the cache for a keyword whose holder cannot satisfy the probe:
    // the multicast phase rejects everywhere and the fallback flood answers
    session.run(&mut fabric, &compile("MATCH ANY(humidity) APPLY count;", 3), multicast)?;
    let out = session.run(
        &mut fabric,
        &compile("MATCH ALL(humidity, error) APPLY count;", 4),
        multicast,
    )?;
    describe("misleading cache: fallback re-broadcast proves the miss", &out);
    Ok(())
}
