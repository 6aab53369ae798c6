//! Record placement. Placement is internal to the fabric: requests never
//! see it, and every policy is deterministic so runs are reproducible.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fabric::record::Record;
use crate::fabric::topology::{DpuId, Topology};
use crate::fabric::{Fabric, FabricError};

pub const FNV_OFFSET_BASIS: u64 = 14695981039346656037;
pub const FNV_PRIME: u64 = 1099511628211;

/// FNV-1a 64-bit, bit-exact so hash placements are reproducible across
/// implementations.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET_BASIS;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PlacementPolicy {
    /// Input order cycling DPUs in row-major order.
    RoundRobin,
    /// FNV-1a of the lexicographically smallest keyword, modulo DPU count,
    /// mapped to the row-major DPU at that index.
    KeywordHash,
    /// Greedy co-location of records sharing at least one keyword, bounded
    /// by a per-DPU capacity, spilling round-robin once a DPU fills up.
    /// `None` means the default capacity ceil(2N / dpu_count).
    Affinity { capacity: Option<usize> },
}

impl PlacementPolicy {
    pub fn affinity_default() -> Self {
        PlacementPolicy::Affinity { capacity: None }
    }
}

impl std::fmt::Display for PlacementPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            PlacementPolicy::RoundRobin => "round-robin",
            PlacementPolicy::KeywordHash => "keyword-hash",
            PlacementPolicy::Affinity { .. } => "affinity",
        };
        write!(f, "{name}")
    }
}

impl std::str::FromStr for PlacementPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "round-robin" => Ok(PlacementPolicy::RoundRobin),
            "keyword-hash" => Ok(PlacementPolicy::KeywordHash),
            "affinity" => Ok(PlacementPolicy::affinity_default()),
            other => Err(format!(
                "unknown placement policy {other:?} (expected round-robin, keyword-hash, or affinity)"
            )),
        }
    }
}

/// Incremental placement engine. Records are assigned one at a time so the
/// caller can observe that each placement touches exactly one DPU.
pub struct Placer {
    policy: PlacementPolicy,
    order: Vec<DpuId>,
    cursor: usize,
    counts: BTreeMap<DpuId, usize>,
    capacity: Option<usize>,
}

impl Placer {
    /// `expected_total` sizes the default affinity capacity; round-robin and
    /// keyword-hash ignore it.
    pub fn new(policy: PlacementPolicy, topology: &Topology, expected_total: usize) -> Self {
        let order = topology.dpus_row_major();
        let capacity = match policy {
            PlacementPolicy::Affinity { capacity } => Some(capacity.unwrap_or_else(|| {
                // ceil(2N / dpu_count), at least 1
                (2 * expected_total).div_ceil(order.len()).max(1)
            })),
            _ => None,
        };
        Self {
            policy,
            order,
            cursor: 0,
            counts: BTreeMap::new(),
            capacity,
        }
    }

    /// Chooses the DPU for `record` without storing it.
    pub fn assign(&mut self, fabric: &Fabric, record: &Record) -> Result<DpuId, FabricError> {
        let chosen = match self.policy {
            PlacementPolicy::RoundRobin => {
                let dpu = self.order[self.cursor].clone();
                self.cursor = (self.cursor + 1) % self.order.len();
                dpu
            }
            PlacementPolicy::KeywordHash => {
                let smallest = record
                    .keywords()
                    .iter()
                    .next()
                    .expect("registered records have keywords");
                let idx = (fnv1a_64(smallest.as_bytes()) % self.order.len() as u64) as usize;
                self.order[idx].clone()
            }
            PlacementPolicy::Affinity { .. } => self.assign_affinity(fabric, record)?,
        };
        *self.counts.entry(chosen.clone()).or_insert(0) += 1;
        Ok(chosen)
    }

    fn assign_affinity(&mut self, fabric: &Fabric, record: &Record) -> Result<DpuId, FabricError> {
        let capacity = self.capacity.expect("affinity placer has a capacity");
        let spare = |counts: &BTreeMap<DpuId, usize>, dpu: &DpuId| {
            counts.get(dpu).copied().unwrap_or(0) < capacity
        };
        // first DPU in row-major order that shares a keyword and has room
        for dpu in &self.order {
            if !spare(&self.counts, dpu) {
                continue;
            }
            let digest = fabric.dpu(dpu)?.index.digest();
            if record.keywords().iter().any(|kw| digest.contains(kw)) {
                return Ok(dpu.clone());
            }
        }
        // spill: next DPU with room, cycling from the spill cursor
        for step in 0..self.order.len() {
            let idx = (self.cursor + step) % self.order.len();
            if spare(&self.counts, &self.order[idx]) {
                self.cursor = (idx + 1) % self.order.len();
                return Ok(self.order[idx].clone());
            }
        }
        Err(FabricError::CapacityExceeded {
            record: record.id.clone(),
            capacity,
        })
    }
}

/// Places a batch of registered records, updating stores and knowledge
/// indexes. Returns the record-id -> DPU assignment; it is total and
/// exclusive (every record lands on exactly one DPU).
pub fn place_records(
    fabric: &mut Fabric,
    records: &[Record],
    policy: PlacementPolicy,
) -> Result<BTreeMap<String, DpuId>, FabricError> {
    let mut placer = Placer::new(policy, fabric.topology(), records.len());
    let mut assignment = BTreeMap::new();
    for record in records {
        let dpu = placer.assign(fabric, record)?;
        fabric.store_record(&dpu, record.clone())?;
        assignment.insert(record.id.clone(), dpu);
    }
    Ok(assignment)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::build_fabric;
    use crate::fabric::record::{load_dataset, ExtractionPolicy};
    use crate::fabric::topology::dpu2;

    pub const D1: &str = include_str!("../../fixtures/d1.jsonl");

    fn d1_records() -> Vec<Record> {
        load_dataset(D1.as_bytes(), ExtractionPolicy::ExplicitTags).unwrap()
    }

    #[test]
    fn round_robin_cycles_row_major() {
        let topo = Topology::grid_2d(2, 2).unwrap();
        let mut fabric = build_fabric(topo, 7).unwrap();
        let assignment = place_records(
            &mut fabric,
            &d1_records(),
            PlacementPolicy::RoundRobin,
        )
        .unwrap();
        let expect = [
            ("r1", dpu2(0, 0)),
            ("r2", dpu2(0, 1)),
            ("r3", dpu2(1, 0)),
            ("r4", dpu2(1, 1)),
            ("r5", dpu2(0, 0)),
            ("r6", dpu2(0, 1)),
            ("r7", dpu2(1, 0)),
            ("r8", dpu2(1, 1)),
        ];
        for (id, dpu) in expect {
            assert_eq!(assignment[id], dpu, "{id}");
        }
    }

    // Expected values recomputed independently from the FNV-1a definition
    // over each record's lexicographically smallest keyword, mod 4:
    //   sensor -> index 3, humidity -> 0, error -> 1, info -> 1,
    //   cat -> 3, pressure -> 2.
    #[test]
    fn keyword_hash_matches_independent_fnv_computation() {
        let topo = Topology::grid_2d(2, 2).unwrap();
        let mut fabric = build_fabric(topo, 0).unwrap();
        let assignment = place_records(
            &mut fabric,
            &d1_records(),
            PlacementPolicy::KeywordHash,
        )
        .unwrap();
        let expect = [
            ("r1", dpu2(1, 1)),
            ("r2", dpu2(1, 1)),
            ("r3", dpu2(0, 0)),
            ("r4", dpu2(0, 1)),
            ("r5", dpu2(0, 1)),
            ("r6", dpu2(1, 1)),
            ("r7", dpu2(1, 1)),
            ("r8", dpu2(1, 0)),
        ];
        for (id, dpu) in expect {
            assert_eq!(assignment[id], dpu, "{id}");
        }
    }

    #[test]
    fn fnv_reference_vectors() {
        // Frozen from the stated offset basis and prime.
        assert_eq!(fnv1a_64(b"sensor"), 0xe27214187bb4af5b);
        assert_eq!(fnv1a_64(b"humidity"), 0x0db801b199cb3940);
        assert_eq!(fnv1a_64(b""), FNV_OFFSET_BASIS);
    }

    #[test]
    fn affinity_colocates_shared_keywords() {
        let topo = Topology::grid_2d(2, 2).unwrap();
        let mut fabric = build_fabric(topo, 0).unwrap();
        let records = d1_records();
        let assignment =
            place_records(&mut fabric, &records, PlacementPolicy::affinity_default())
                .unwrap();
        // r1 spills to the first DPU; every later sensor record shares
        // "sensor" with it, so they pile on (0,0) until capacity 4 is hit.
        assert_eq!(assignment["r1"], dpu2(0, 0));
        assert_eq!(assignment["r2"], dpu2(0, 0));
        assert_eq!(assignment["r3"], dpu2(0, 0));
        assert_eq!(assignment["r6"], dpu2(0, 0));
        // capacity ceil(2*8/4) = 4 reached, r8 shares no room on (0,0)
        assert_ne!(assignment["r8"], dpu2(0, 0));
        // log records co-locate with each other
        assert_eq!(assignment["r4"], assignment["r5"]);
    }

    #[test]
    fn affinity_errors_when_total_capacity_exceeded() {
        let topo = Topology::grid_2d(1, 2).unwrap();
        let mut fabric = build_fabric(topo, 0).unwrap();
        let records = d1_records();
        let err = place_records(
            &mut fabric,
            &records,
            PlacementPolicy::Affinity { capacity: Some(3) },
        )
        .unwrap_err();
        assert!(matches!(err, FabricError::CapacityExceeded { .. }));
    }

    #[test]
    fn single_record_digest_equals_record_keywords() {
        let topo = Topology::grid_2d(2, 2).unwrap();
        for policy in [
            PlacementPolicy::RoundRobin,
            PlacementPolicy::KeywordHash,
            PlacementPolicy::affinity_default(),
        ] {
            let mut fabric = build_fabric(topo.clone(), 0).unwrap();
            let records = vec![d1_records().remove(0)];
            let assignment = place_records(&mut fabric, &records, policy).unwrap();
            let dpu = assignment["r1"].clone();
            assert_eq!(fabric.knowledge_digest(&dpu).unwrap(), *records[0].keywords());
        }
    }
}
