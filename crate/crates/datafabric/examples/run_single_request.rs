//! One request end to end: injection, per-DPU accept/reject, confirmations
//! and results flowing home, the merged answer, and the full event trace.

use std::error::Error;
use std::fs::File;
use std::io::BufReader;

use datafabric::{
    build_fabric, load_dataset, place_records, run_request, Compiler, ExtractionPolicy,
    PlacementPolicy, Registry, Request, RoutingPolicy, Topology,
};

fn compile(text: &str) -> Request {
    let ast = datafabric::parse_request(text).expect("request parses");
    Compiler::new(Registry::standard()).compile(&ast).expect("request compiles")
}

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/d1.jsonl");
    let records = load_dataset(
        BufReader::new(File::open(path)?),
        ExtractionPolicy::ExplicitTags,
    )?;
    let mut fabric = build_fabric(Topology::grid_2d(2, 2)?, 7)?;
    place_records(&mut fabric, &records, PlacementPolicy::RoundRobin)?;

    let request = compile("MATCH ANY(temp) WHERE value > 29 APPLY count;");
    let registry = Registry::standard();
    let out = run_request(&mut fabric, &request, &registry, RoutingPolicy::SerpentineWalk)?;

    println!("trace (tick, event, endpoints, bytes):");
    for event in &out.events {
        println!("    {}", serde_json::to_string(event)?);
    }

    let r = &out.result;
    println!("\nstatus        {:?}", r.status);
    println!("payload       {:?}", r.payload);
    println!("counters      {} processing, {} rejection", r.processing, r.rejection);
    println!("confirmations {}", r.confirmations);
    println!("metrics       {:?}", out.metrics);
    Ok(())
}
