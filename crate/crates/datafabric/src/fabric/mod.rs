//! The persistent processing space: mesh topology, DPUs, records, and
//! placement. Requests address this space by keyword only; nothing in here
//! leaks placement back to the initiator.

pub mod index;
pub mod placement;
pub mod record;
pub mod topology;
pub mod value;

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use thiserror::Error;

use crate::dpu::DpuState;

pub use index::KnowledgeIndex;
pub use placement::{fnv1a_64, place_records, PlacementPolicy, Placer};
pub use record::{load_dataset, register_record, ExtractionPolicy, RawRecord, Record};
pub use topology::{DpuId, Topology};
pub use value::{FieldValue, ValueKind};

#[derive(Debug, Error)]
pub enum FabricError {
    #[error("{0}")]
    InvalidTopology(String),
    #[error("duplicate record id {0:?}")]
    DuplicateRecordId(String),
    #[error("empty keyword set for record {0:?} (white-noise data is unaddressable)")]
    EmptyKeywordSet(String),
    #[error("malformed record: {0}")]
    MalformedRecord(String),
    #[error("unknown DPU {0}")]
    UnknownDpu(DpuId),
    #[error("placement capacity exceeded for record {record:?} (per-DPU capacity {capacity})")]
    CapacityExceeded { record: String, capacity: usize },
}

/// The whole processing space: one DPU per mesh coordinate, plus the single
/// external attachment where the initiator injects requests.
#[derive(Debug, Clone)]
pub struct Fabric {
    topology: Topology,
    dpus: BTreeMap<DpuId, DpuState>,
    initiator_attachment: DpuId,
    seed: u64,
}

/// Creates an empty fabric. Every DPU starts idle with an empty store; the
/// initiator attaches at the all-zeros coordinate so hop counts are
/// reproducible.
pub fn build_fabric(topology: Topology, seed: u64) -> Result<Fabric, FabricError> {
    let dpus = topology
        .dpus_row_major()
        .into_iter()
        .map(|id| (id.clone(), DpuState::new(id)))
        .collect();
    let initiator_attachment = topology.initiator_attachment();
    Ok(Fabric {
        topology,
        dpus,
        initiator_attachment,
        seed,
    })
}

impl Fabric {
    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn initiator_attachment(&self) -> &DpuId {
        &self.initiator_attachment
    }

    pub fn dpu(&self, id: &DpuId) -> Result<&DpuState, FabricError> {
        self.dpus
            .get(id)
            .ok_or_else(|| FabricError::UnknownDpu(id.clone()))
    }

    pub fn dpu_mut(&mut self, id: &DpuId) -> Result<&mut DpuState, FabricError> {
        self.dpus
            .get_mut(id)
            .ok_or_else(|| FabricError::UnknownDpu(id.clone()))
    }

    /// DPUs in row-major order.
    pub fn dpus(&self) -> impl Iterator<Item = (&DpuId, &DpuState)> {
        self.dpus.iter()
    }

    pub fn dpu_count(&self) -> usize {
        self.dpus.len()
    }

    /// Stores a registered record on one DPU, keeping its knowledge index
    /// current. Rejects ids already present anywhere in the fabric.
    pub fn store_record(&mut self, dpu: &DpuId, record: Record) -> Result<(), FabricError> {
        if self.dpus.values().any(|d| d.store.contains_key(&record.id)) {
            return Err(FabricError::DuplicateRecordId(record.id));
        }
        let state = self.dpu_mut(dpu)?;
        state.index.insert(&record);
        state.store.insert(record.id.clone(), record);
        Ok(())
    }

    /// Union of the keywords of the records stored on one DPU.
    pub fn knowledge_digest(&self, dpu: &DpuId) -> Result<BTreeSet<String>, FabricError> {
        Ok(self.dpu(dpu)?.index.digest())
    }

    /// Total record population across all DPUs.
    pub fn record_count(&self) -> usize {
        self.dpus.values().map(|d| d.store.len()).sum()
    }

    /// Every record in the fabric in global id order, with its holder.
    /// Used by the centralized baseline, which pulls everything.
    pub fn all_records(&self) -> Vec<(&DpuId, &Record)> {
        let mut out: Vec<(&DpuId, &Record)> = self
            .dpus
            .iter()
            .flat_map(|(id, state)| state.store.values().map(move |r| (id, r)))
            .collect();
        out.sort_by(|a, b| a.1.id.cmp(&b.1.id));
        out
    }
}
