//! Gradual relation formation: each epoch DPUs swap digests with mesh
//! neighbors (their own plus everything learned so far), and an edge forms
//! the moment a learned digest clears the Jaccard threshold. Knowledge
//! travels one hop per epoch, so the graph stabilizes within the mesh
//! diameter and matches the all-pairs oracle exactly.

use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};

use crate::fabric::{DpuId, Fabric, FabricError};
use crate::noc::neighbors;

/// |A ∩ B| / |A ∪ B|, defined as 0 when both sets are empty.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationEdge {
    pub a: DpuId,
    pub b: DpuId,
    pub weight: f64,
    pub formed_at_epoch: u32,
}

/// Undirected weighted graph over DPUs. Endpoints are stored in sorted
/// order, so each edge appears once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationGraph {
    edges: BTreeMap<(DpuId, DpuId), (f64, u32)>,
}

impl RelationGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(a: &DpuId, b: &DpuId) -> (DpuId, DpuId) {
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    }

    /// Records an edge the first time it forms; later sightings keep the
    /// original formation epoch.
    pub fn form(&mut self, a: &DpuId, b: &DpuId, weight: f64, epoch: u32) {
        assert_ne!(a, b, "relation graph never holds self-edges");
        self.edges.entry(Self::key(a, b)).or_insert((weight, epoch));
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn edge(&self, a: &DpuId, b: &DpuId) -> Option<(f64, u32)> {
        self.edges.get(&Self::key(a, b)).copied()
    }

    pub fn edges(&self) -> Vec<RelationEdge> {
        self.edges
            .iter()
            .map(|((a, b), (weight, formed_at_epoch))| RelationEdge {
                a: a.clone(),
                b: b.clone(),
                weight: *weight,
                formed_at_epoch: *formed_at_epoch,
            })
            .collect()
    }

    /// Equality on the edge sets and weights, ignoring formation epochs
    /// (the oracle has no gossip timeline).
    pub fn same_edges(&self, other: &RelationGraph) -> bool {
        self.edges.len() == other.edges.len()
            && self
                .edges
                .iter()
                .all(|(k, (w, _))| other.edges.get(k).map(|(ow, _)| ow) == Some(w))
    }
}

/// Epoch-stepped evolution over one fabric.
#[derive(Debug)]
pub struct Evolution {
    theta: f64,
    epoch: u32,
    graph: RelationGraph,
}

impl Evolution {
    pub fn new(theta: f64) -> Result<Self, FabricError> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(FabricError::InvalidTopology(format!(
                "similarity threshold must be in (0, 1], got {theta}"
            )));
        }
        Ok(Self { theta, epoch: 0, graph: RelationGraph::new() })
    }

    pub fn epoch(&self) -> u32 {
        self.epoch
    }

    pub fn graph(&self) -> &RelationGraph {
        &self.graph
    }

    /// Runs one gossip epoch. Every DPU offers its neighbors a snapshot of
    /// what it knew when the epoch began: its own digest plus previously
    /// learned peer digests. Returns true if anything new was learned.
    pub fn step(&mut self, fabric: &mut Fabric) -> bool {
        self.epoch += 1;
        let ids = fabric.topology().dpus_row_major();

        let mut offers: BTreeMap<DpuId, BTreeMap<DpuId, BTreeSet<String>>> = BTreeMap::new();
        for (id, dpu) in fabric.dpus() {
            let mut known = dpu.gossip.clone();
            known.insert(id.clone(), dpu.index.digest());
            offers.insert(id.clone(), known);
        }

        let mut changed = false;
        for id in &ids {
            let own_digest = offers[id][id].clone();
            for peer in neighbors(fabric.topology(), id).expect("mesh neighbor") {
                for (origin, digest) in &offers[&peer] {
                    if origin == id {
                        continue;
                    }
                    let dpu = fabric.dpu_mut(id).expect("dpu exists");
                    if dpu.gossip.contains_key(origin) {
                        continue;
                    }
                    dpu.gossip.insert(origin.clone(), digest.clone());
                    changed = true;
                    let weight = jaccard(&own_digest, digest);
                    if weight >= self.theta {
                        dpu.relations.insert(origin.clone(), weight);
                        self.graph.form(id, origin, weight, self.epoch);
                    }
                }
            }
        }
        changed
    }

    /// Steps until no DPU learns anything new, returning the last epoch in
    /// which knowledge still spread. Bounded by the mesh diameter: digests
    /// travel one hop per epoch.
    pub fn run_to_fixpoint(&mut self, fabric: &mut Fabric) -> u32 {
        let mut last_change = 0;
        while self.step(fabric) {
            last_change = self.epoch;
        }
        last_change
    }
}

/// Brute-force all-pairs construction the gossip must converge to. Formation
/// epochs are set to the mesh distance, the epoch at which gossip first
/// carries one endpoint's digest to the other.
pub fn relation_oracle(fabric: &Fabric, theta: f64) -> RelationGraph {
    let mut graph = RelationGraph::new();
    let digests: Vec<(DpuId, BTreeSet<String>)> = fabric
        .dpus()
        .map(|(id, dpu)| (id.clone(), dpu.index.digest()))
        .collect();
    for (i, (a, da)) in digests.iter().enumerate() {
        for (b, db) in digests.iter().skip(i + 1) {
            let weight = jaccard(da, db);
            if weight >= theta {
                graph.form(a, b, weight, a.manhattan_distance(b) as u32);
            }
        }
    }
    graph
}
