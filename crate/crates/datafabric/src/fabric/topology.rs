//! Mesh geometry: 2D or 3D grids of DPUs addressed by coordinates.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::fabric::FabricError;

/// Shape of the processing mesh: two or three dimensions, each with a
/// positive extent. The DPU population is the product of the extents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    extents: Vec<usize>,
}

impl Topology {
    /// Builds a topology from per-dimension extents. Only 2D and 3D meshes
    /// are accepted, and every extent must be at least 1.
    pub fn new(extents: &[usize]) -> Result<Self, FabricError> {
        if extents.len() < 2 || extents.len() > 3 {
            return Err(FabricError::InvalidTopology(format!(
                "invalid topology: dims must be 2 or 3, got {}",
                extents.len()
            )));
        }
        if extents.iter().any(|&e| e == 0) {
            return Err(FabricError::InvalidTopology(
                "invalid topology: every extent must be >= 1".into(),
            ));
        }
        Ok(Self {
            extents: extents.to_vec(),
        })
    }

    pub fn grid_2d(rows: usize, cols: usize) -> Result<Self, FabricError> {
        Self::new(&[rows, cols])
    }

    pub fn grid_3d(x: usize, y: usize, z: usize) -> Result<Self, FabricError> {
        Self::new(&[x, y, z])
    }

    pub fn dims(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents
    }

    /// Total number of DPUs in the mesh.
    pub fn dpu_count(&self) -> usize {
        self.extents.iter().product()
    }

    /// Mesh diameter: the longest shortest-path distance between two DPUs.
    pub fn diameter(&self) -> usize {
        self.extents.iter().map(|e| e - 1).sum()
    }

    /// The DPU whose external port connects the request initiator.
    pub fn initiator_attachment(&self) -> DpuId {
        DpuId::new(vec![0; self.extents.len()])
    }

    pub fn contains(&self, dpu: &DpuId) -> bool {
        dpu.coords().len() == self.extents.len()
            && dpu
                .coords()
                .iter()
                .zip(&self.extents)
                .all(|(&c, &e)| c < e)
    }

    /// All DPU ids in row-major order (first coordinate varies slowest).
    pub fn dpus_row_major(&self) -> Vec<DpuId> {
        let mut out = Vec::with_capacity(self.dpu_count());
        let mut coords = vec![0usize; self.extents.len()];
        loop {
            out.push(DpuId::new(coords.clone()));
            // odometer increment, last coordinate fastest
            let mut dim = self.extents.len();
            loop {
                if dim == 0 {
                    return out;
                }
                dim -= 1;
                coords[dim] += 1;
                if coords[dim] < self.extents[dim] {
                    break;
                }
                coords[dim] = 0;
            }
        }
    }

    /// Row-major linear index of a DPU.
    pub fn row_major_index(&self, dpu: &DpuId) -> usize {
        let mut idx = 0;
        for (c, e) in dpu.coords().iter().zip(&self.extents) {
            idx = idx * e + c;
        }
        idx
    }
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.extents.iter().map(|e| e.to_string()).collect();
        write!(f, "{}", parts.join("x"))
    }
}

impl FromStr for Topology {
    type Err = FabricError;

    /// Parses topology specs of the form `4x4` or `2x2x2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Result<Vec<usize>, _> = s.split('x').map(|p| p.trim().parse()).collect();
        match parts {
            Ok(extents) => Topology::new(&extents),
            Err(_) => Err(FabricError::InvalidTopology(format!(
                "invalid topology spec {s:?}: expected AxB or AxBxC"
            ))),
        }
    }
}

/// Coordinate address of a single DPU. Ordering is lexicographic over the
/// coordinate tuple, which fixes all deterministic tie-breaks in the
/// simulator.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DpuId {
    coords: Vec<usize>,
}

impl DpuId {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &[usize] {
        &self.coords
    }

    /// Manhattan distance to another DPU in the same mesh.
    pub fn manhattan_distance(&self, other: &DpuId) -> usize {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(&a, &b)| a.abs_diff(b))
            .sum()
    }
}

impl fmt::Display for DpuId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Shorthand used all over the tests.
pub fn dpu2(a: usize, b: usize) -> DpuId {
    DpuId::new(vec![a, b])
}

pub fn dpu3(a: usize, b: usize, c: usize) -> DpuId {
    DpuId::new(vec![a, b, c])
}
