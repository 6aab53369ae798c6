//! Builds a fabric over the bundled dataset and shows what each placement
//! policy does: where the records land and what every DPU ends up knowing.

use std::error::Error;
use std::fs::File;
use std::io::BufReader;

use datafabric::{
    build_fabric, load_dataset, place_records, ExtractionPolicy, PlacementPolicy, Topology,
};

fn main() -> Result<(), Box<dyn Error>> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/d1.jsonl");

    // extraction decides the keyword set; tags+text also tokenizes text fields
    for extraction in [ExtractionPolicy::ExplicitTags, ExtractionPolicy::TagsPlusTextTokens] {
        let records = load_dataset(BufReader::new(File::open(path)?), extraction)?;
        let first = &records[0];
        println!(
            "extraction {extraction}: {} keywords on {}: {:?}",
            first.keywords().len(),
            first.id,
            first.keywords()
        );
    }

    let records = load_dataset(
        BufReader::new(File::open(path)?),
        ExtractionPolicy::ExplicitTags,
    )?;
    println!(
        "\n{} records, {} bytes if serialized back to back",
        records.len(),
        records.iter().map(|r| r.serialized_size()).sum::<u64>()
    );

    for policy in [
        PlacementPolicy::RoundRobin,
        PlacementPolicy::KeywordHash,
        PlacementPolicy::affinity_default(),
    ] {
        let mut fabric = build_fabric(Topology::grid_2d(2, 2)?, 7)?;
        place_records(&mut fabric, &records, policy)?;
        println!("\nplacement {policy}:");
        for (id, dpu) in fabric.dpus() {
            let stored: Vec<&str> = dpu.store.keys().map(String::as_str).collect();
            let digest: Vec<String> = dpu.index.digest().into_iter().collect();
            println!("  {id}  records {stored:?}");
            println!("        digest  {digest:?}");
        }
    }
    Ok(())
}
