//! DPUs gossip their knowledge digests to mesh neighbors, epoch by epoch,
//! and form weighted relations once similarity crosses the threshold. The
//! graph settles within the mesh diameter and matches the all-pairs oracle.

use std::error::Error;
use std::fs::File;
use std::io::BufReader;

use datafabric::dpu::{relation_oracle, Evolution};
use datafabric::{
    build_fabric, load_dataset, place_records, ExtractionPolicy, Fabric, PlacementPolicy,
    Topology,
};

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
    let theta = 0.25;
    let mut fabric = fresh_fabric()?;
    let mut evolution = Evolution::new(theta)?;
    println!("theta {theta}, diameter {}", fabric.topology().diameter());
    loop {
        let changed = evolution.step(&mut fabric);
        println!(
            "epoch {}: {} edge(s){}",
            evolution.epoch(),
            evolution.graph().len(),
            if changed { "" } else { " (no change, settled)" }
        );
        if !changed {
            break;
        }
    }
    for edge in evolution.graph().edges() {
        println!(
            "    {} -- {}  weight {:.3}  formed at epoch {} (mesh distance {})",
            edge.a,
            edge.b,
            edge.weight,
            edge.formed_at_epoch,
            edge.a.manhattan_distance(&edge.b),
        );
    }
    assert!(evolution.graph().same_edges(&relation_oracle(&fabric, theta)));
    println!("matches the all-pairs oracle\n");

    // threshold sweep: strict thresholds form nothing, loose ones everything
    for theta in [1.0, 0.25, 0.01] {
        let mut fabric = fresh_fabric()?;
        let mut evolution = Evolution::new(theta)?;
        let settled_at = evolution.run_to_fixpoint(&mut fabric);
        println!(
            "theta {theta:<4}: {} edge(s), settled after epoch {settled_at}",
            evolution.graph().len()
        );
    }
    Ok(())
}
