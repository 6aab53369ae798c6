//! Sweeps request selectivity from 100% down to 0.1% over a generated
//! 1000-record dataset. The fabric's payload shrinks with the answer; the
//! pull-everything baseline pays the full dataset every single time.

use std::collections::BTreeMap;
use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use datafabric::fabric::{register_record, RawRecord};
use datafabric::{
    build_fabric, place_records, run_centralized, run_request, Compiler, ExtractionPolicy,
    PlacementPolicy, Record, Registry, Request, RoutingPolicy, Topology,
};

fn compile(text: &str) -> Request {
    let ast = datafabric::parse_request(text).expect("request parses");
    Compiler::new(Registry::standard()).compile(&ast).expect("request compiles")
}

fn generate(count: usize, seed: u64) -> Vec<Record> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool = ["alpha", "beta", "gamma", "delta"];
    (0..count)
        .map(|i| {
            let mut tags = vec![pool[rng.gen_range(0..pool.len())].to_string()];
            if rng.gen_bool(0.5) {
                tags.push(pool[rng.gen_range(0..pool.len())].to_string());
            }
            let fields: BTreeMap<String, _> =
                [("value".to_string(), rng.gen_range(0..1000i64).into())].into();
            register_record(
                &RawRecord { id: format!("r{i:04}"), tags, fields },
                ExtractionPolicy::ExplicitTags,
            )
            .expect("generated record registers")
        })
        .collect()
}

fn main() -> Result<(), Box<dyn Error>> {
    let records = generate(1000, 42);
    let mut fabric = build_fabric(Topology::grid_2d(4, 4)?, 1)?;
    place_records(&mut fabric, &records, PlacementPolicy::KeywordHash)?;
    let registry = Registry::standard();

    println!(
        "{:>9} {:>7} {:>15} {:>17}",
        "threshold", "matched", "fabric payload", "baseline payload"
    );
    let mut previous = u64::MAX;
    let mut baseline_payload = None;
    for threshold in [1000, 750, 500, 250, 100, 50, 10, 1] {
        let request = compile(&format!(
            "MATCH ANY(alpha, beta, gamma, delta) WHERE value < {threshold} APPLY search;"
        ));
        let (_, base) = run_centralized(&fabric, &request, &registry);
        let out = run_request(&mut fabric, &request, &registry, RoutingPolicy::SerpentineWalk)?;
        let matched = match &out.result.payload {
            datafabric::Payload::Ids(ids) => ids.len(),
            other => unreachable!("search returns ids, got {other:?}"),
        };
        println!(
            "{:>9} {:>7} {:>15} {:>17}",
            threshold, matched, out.metrics.payload_bytes, base.payload_bytes
        );
        assert!(out.metrics.payload_bytes <= previous, "payload must shrink with selectivity");
        previous = out.metrics.payload_bytes;
        assert_eq!(*baseline_payload.get_or_insert(base.payload_bytes), base.payload_bytes);
    }
    println!("\nfabric payload is non-increasing; the baseline never moves less");
    Ok(())
}
