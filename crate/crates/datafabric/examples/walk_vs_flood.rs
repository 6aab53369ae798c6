//! The two full-coverage disciplines answer identically; they differ only
//! in how the request travels, so in latency and link traffic.

use std::error::Error;
use std::fs::File;
use std::io::BufReader;

use datafabric::noc::{plan_walk, spanning_tree};
use datafabric::{
    build_fabric, load_dataset, place_records, run_request, Compiler, ExtractionPolicy, Fabric,
    PlacementPolicy, Registry, Request, RoutingPolicy, Topology,
};

fn compile(text: &str) -> Request {
    let ast = datafabric::parse_request(text).expect("request parses");
    Compiler::new(Registry::standard()).compile(&ast).expect("request compiles")
}

fn fresh_fabric() -> Result<Fabric, Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/d1.jsonl");
    let records = load_dataset(
        BufReader::new(File::open(path)?),
        ExtractionPolicy::ExplicitTags,
    )?;
    let mut fabric = build_fabric(Topology::grid_2d(2, 2)?, 7)?;
    place_records(&mut fabric, &records, PlacementPolicy::RoundRobin)?;
    Ok(fabric)
}

fn main() -> Result<(), Box<dyn Error>> {
    let topology = Topology::grid_2d(2, 2)?;
    let order: Vec<String> = plan_walk(&topology).iter().map(|d| d.to_string()).collect();
    println!("walk order: {}", order.join(" -> "));
    let tree: Vec<String> = spanning_tree(&topology, &topology.initiator_attachment())
        .iter()
        .map(|(child, parent)| format!("{child} <- {parent}"))
        .collect();
    println!("flood tree: {}", tree.join(", "));

    let registry = Registry::standard();
    println!(
        "\n{:<6} {:>5} {:>10} {:>8} {:>16} payload",
        "mode", "hops", "byte-hops", "packets", "completion-tick"
    );
    let mut payloads = Vec::new();
    for policy in [RoutingPolicy::SerpentineWalk, RoutingPolicy::FloodSpanningTree] {
        let mut fabric = fresh_fabric()?;
        let request = compile("MATCH ANY(temp) WHERE value > 29 APPLY count;");
        let out = run_request(&mut fabric, &request, &registry, policy)?;
        println!(
            "{:<6} {:>5} {:>10} {:>8} {:>16} {:?}",
            policy.to_string(),
            out.metrics.hops,
            out.metrics.byte_hops,
            out.metrics.packets,
            out.metrics.completion_tick,
            out.result.payload,
        );
        payloads.push((out.result.payload, out.result.processing, out.result.rejection));
    }
    assert_eq!(payloads[0], payloads[1], "disciplines must agree");
    println!("\nanswers and counters agree; the network is the only variable");
    Ok(())
}
